"""Scale-invariant SNR and best-permutation scoring.

SI-SNR zero-means both signals, projects the estimate onto the reference,
and reports the energy ratio of the projection to the orthogonal residual
in dB.  Perfect reconstruction comes back as +inf rather than an error so
oracle-mask fixtures can be scored.
"""

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .dsp import Waveform

__all__ = ["si_snr", "si_snr_improvement", "snr", "score_with_permutation", "ScoreReport"]


def _samples(w) -> np.ndarray:
    return w.samples if isinstance(w, Waveform) else np.asarray(w, dtype=np.float64)


def si_snr(est, ref) -> float:
    """Scale-invariant signal-to-noise ratio in dB.

    Returns ``math.inf`` when the residual is exactly zero and ``-inf``
    when the estimate is orthogonal to the reference.
    """
    e = _samples(est)
    r = _samples(ref)
    if e.shape != r.shape:
        raise ValueError(f"length mismatch: estimate {e.shape}, reference {r.shape}")
    e = e - e.mean()
    r = r - r.mean()
    ref_power = float(r @ r)
    if ref_power == 0.0:
        raise ValueError("reference is zero after mean removal")
    target = (float(e @ r) / ref_power) * r
    noise = e - target
    p_noise = float(noise @ noise)
    p_target = float(target @ target)
    if p_noise == 0.0:
        return math.inf
    if p_target == 0.0:
        return -math.inf
    return 10.0 * math.log10(p_target / p_noise)


def si_snr_improvement(est, ref, mixture) -> float:
    """SI-SNR gain of the estimate over the unprocessed mixture, in dB."""
    return si_snr(est, ref) - si_snr(mixture, ref)


def snr(est, ref) -> float:
    """Plain SNR in dB: reference energy over residual energy, no scaling."""
    e = _samples(est)
    r = _samples(ref)
    if e.shape != r.shape:
        raise ValueError(f"length mismatch: estimate {e.shape}, reference {r.shape}")
    ref_power = float(r @ r)
    if ref_power == 0.0:
        raise ValueError("reference is zero")
    resid = float((e - r) @ (e - r))
    if resid == 0.0:
        return math.inf
    return 10.0 * math.log10(ref_power / resid)


@dataclass
class ScoreReport:
    """Best-permutation separation scores, indexed by reference order."""

    si_snr: tuple            # dB per reference
    si_snri: tuple           # dB gain over the mixture per reference
    snr: tuple               # plain SNR per reference
    permutation: tuple       # permutation[i] = estimate index matched to reference i

    @property
    def mean_si_snr(self) -> float:
        return float(np.mean(self.si_snr))

    @property
    def mean_si_snri(self) -> float:
        return float(np.mean(self.si_snri))


def score_with_permutation(ests: list, refs: list, mixture) -> ScoreReport:
    """Score estimates against references, maximizing mean SI-SNR over all
    estimate-to-reference pairings."""
    c = len(refs)
    if len(ests) != c:
        raise ValueError(f"got {len(ests)} estimates for {c} references")
    pair = [[si_snr(ests[j], refs[i]) for j in range(c)] for i in range(c)]
    best_perm, best_mean = None, None
    for perm in permutations(range(c)):
        mean = sum(pair[i][perm[i]] for i in range(c)) / c
        if math.isnan(mean):  # +inf and -inf pairs in one permutation
            mean = -math.inf
        if best_mean is None or mean > best_mean:
            best_perm, best_mean = perm, mean
    mix_scores = [si_snr(mixture, refs[i]) for i in range(c)]
    chosen = tuple(pair[i][best_perm[i]] for i in range(c))
    return ScoreReport(
        si_snr=chosen,
        si_snri=tuple(chosen[i] - mix_scores[i] for i in range(c)),
        snr=tuple(snr(ests[best_perm[i]], refs[i]) for i in range(c)),
        permutation=best_perm,
    )
