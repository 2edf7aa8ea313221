"""Test-phase attractor strategies and the end-to-end separation pipeline.

Attractors for a mixture can come from three places: clustering the
embeddings (k-means), a fixed table averaged over training, or anchored
subset selection.  Whichever way they are found, mask generation and
signal reconstruction are identical.
"""

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .adanet import select_attractor_set
from .attractor import estimate_masks, similarity_scores, threshold_vector
from .dsp import (
    ComplexSpectrogram,
    Waveform,
    flatten_tf,
    log_magnitude,
    magnitude,
    reconstruct,
    stft,
)
from .nn import EmbedNet

__all__ = [
    "KMeansStrategy",
    "FixedStrategy",
    "AnchoredStrategy",
    "KMeansResult",
    "kmeans",
    "fixed_attractors",
    "separate",
    "PcaProjection",
    "pca_project",
]


@dataclass(frozen=True)
class KMeansStrategy:
    seed: int = 0


@dataclass(frozen=True)
class FixedStrategy:
    attractors: np.ndarray  # C_max x K table computed during training


@dataclass(frozen=True)
class AnchoredStrategy:
    pass


@dataclass
class KMeansResult:
    centers: np.ndarray       # C x K
    labels: np.ndarray        # length FT, every bin assigned to a center
    inertia: float            # final within-cluster squared distance (retained bins)
    history: list             # inertia after each assignment pass


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Squared euclidean distances, points (n,K) x centers (C,K) -> (n,C)."""
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("ncj,ncj->nc", diff, diff)


def kmeans(v: np.ndarray, c: int, w: np.ndarray, seed: int = 0) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding on the retained embeddings.

    Only columns with w=1 participate in fitting; afterwards every bin is
    assigned to its nearest center.  Stops when the relative inertia
    change drops below 1e-6 or after 100 iterations; empty clusters are
    re-seeded to the point farthest from its assigned center.
    """
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w).reshape(-1)
    points = v.T[w > 0]
    n = points.shape[0]
    if n < c:
        raise ValueError(f"only {n} retained bins for C={c} clusters")
    rng = np.random.default_rng(seed)

    # k-means++ seeding
    centers = np.empty((c, v.shape[0]))
    centers[0] = points[rng.integers(n)]
    closest = _sq_dists(points, centers[:1]).min(axis=1)
    for k in range(1, c):
        total = closest.sum()
        if total > 0:
            probs = closest / total
            centers[k] = points[rng.choice(n, p=probs)]
        else:
            centers[k] = points[rng.integers(n)]
        closest = np.minimum(closest, _sq_dists(points, centers[k : k + 1]).min(axis=1))

    history = []
    prev = None
    labels = np.zeros(n, dtype=int)
    for _ in range(100):
        d2 = _sq_dists(points, centers)
        labels = d2.argmin(axis=1)
        inertia = float(d2[np.arange(n), labels].sum())
        history.append(inertia)
        if inertia == 0.0:
            break
        if prev is not None and prev - inertia <= 1e-6 * prev:
            break
        prev = inertia
        for k in range(c):
            member = labels == k
            if member.any():
                centers[k] = points[member].mean(axis=0)
            else:
                farthest = int(d2[np.arange(n), labels].argmax())
                centers[k] = points[farthest]

    full = _sq_dists(v.T, centers)
    return KMeansResult(centers, full.argmin(axis=1), history[-1], history)


def fixed_attractors(training_attractors: list) -> np.ndarray:
    """Average attractor sets from many mixtures into one fixed table.

    Later sets are aligned to the running mean by the row permutation
    minimizing total squared distance (exhaustive over C! orders), so
    consistent speaker roles line up before averaging.
    """
    sets = [np.asarray(a, dtype=np.float64) for a in training_attractors]
    if not sets:
        raise ValueError("no attractor sets to average")
    shape = sets[0].shape
    if any(s.shape != shape for s in sets):
        raise ValueError("attractor sets disagree in shape")
    c = shape[0]
    mean = sets[0].copy()
    for count, current in enumerate(sets[1:], start=2):
        best_perm, best_cost = None, None
        for perm in permutations(range(c)):
            cost = float(np.sum((current[list(perm)] - mean) ** 2))
            if best_cost is None or cost < best_cost:
                best_perm, best_cost = perm, cost
        aligned = current[list(best_perm)]
        mean += (aligned - mean) / count
    return mean


def separate(
    net: EmbedNet,
    mixture: Waveform,
    c: int,
    strategy,
    q: float = 0.9,
) -> list:
    """Separate a mixture into C estimated source waveforms.

    Pipeline: STFT -> log-magnitude -> embeddings -> attractors (per the
    strategy) -> masks -> masked reconstruction with the mixture phase.
    """
    if c < 1:
        raise ValueError("need at least one source")
    spec = stft(mixture)
    mag = magnitude(spec)
    x_flat = mag.flatten()
    v = net.embed(log_magnitude(mag)).data
    w = threshold_vector(x_flat, q)

    if isinstance(strategy, KMeansStrategy):
        attractors = kmeans(v, c, w, seed=strategy.seed).centers
    elif isinstance(strategy, FixedStrategy):
        table = np.asarray(strategy.attractors, dtype=np.float64)
        if table.shape[0] != c:
            raise ValueError(
                f"fixed attractor table has {table.shape[0]} rows, requested C={c}"
            )
        attractors = table
    elif isinstance(strategy, AnchoredStrategy):
        if net.n_anchors == 0:
            raise ValueError("anchored strategy requires a model with anchors")
        if c > net.n_anchors:
            raise ValueError(f"C={c} exceeds the {net.n_anchors} anchors")
        attractors = select_attractor_set(net.anchors.data, v, w, c).attractors
    else:
        raise TypeError(f"unknown strategy: {strategy!r}")

    d = similarity_scores(attractors, v)
    est_masks = estimate_masks(d, net.config.mask_nl)
    return [reconstruct(est_masks[i], spec) for i in range(c)]


@dataclass
class PcaProjection:
    coords: np.ndarray       # dims x FT projected coordinates
    explained: np.ndarray    # fraction of total variance per component
    components: np.ndarray   # dims x K orthonormal basis rows
    mean: np.ndarray         # K, column mean removed before projection

    def project(self, points: np.ndarray) -> np.ndarray:
        """Project extra K-dim row vectors (e.g. attractors) into the basis."""
        return (np.atleast_2d(points) - self.mean) @ self.components.T


def pca_project(v: np.ndarray, dims: int = 3) -> PcaProjection:
    """Principal components of the embedding columns via power iteration.

    Components are extracted one at a time with deflation (tolerance
    1e-9, deterministic start vectors), ordered by eigenvalue.
    """
    v = np.asarray(v, dtype=np.float64)
    k, n = v.shape
    if not (1 <= dims <= k):
        raise ValueError(f"dims must lie in [1, {k}]")
    if n < dims:
        raise ValueError("need at least as many columns as components")
    mean = v.mean(axis=1)
    centered = v - mean[:, None]
    cov = (centered @ centered.T) / n
    total = float(np.trace(cov))
    rng = np.random.default_rng(0)
    components = np.empty((dims, k))
    eigvals = np.empty(dims)
    deflated = cov.copy()
    for i in range(dims):
        vec = rng.standard_normal(k)
        vec /= np.linalg.norm(vec)
        for _ in range(1000):
            nxt = deflated @ vec
            norm = np.linalg.norm(nxt)
            if norm < 1e-300:  # null direction: any unit vector is an eigenvector
                break
            nxt /= norm
            if min(np.linalg.norm(nxt - vec), np.linalg.norm(nxt + vec)) < 1e-9:
                vec = nxt
                break
            vec = nxt
        eigvals[i] = float(vec @ deflated @ vec)
        components[i] = vec
        deflated = deflated - eigvals[i] * np.outer(vec, vec)
    explained = eigvals / total if total > 0 else np.zeros(dims)
    return PcaProjection(components @ centered, explained, components, mean)
