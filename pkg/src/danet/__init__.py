"""Deep attractor networks for single-channel source separation.

A desk-scale, numpy-only implementation: STFT front-end, oracle masks,
a small trainable embedding network with its own reverse-mode gradient
engine, attractor and anchored-attractor mask estimation, three
test-phase separation strategies, SI-SNR scoring, and a deterministic
synthetic-mixture corpus.
"""

from .adanet import (
    adanet_train_step,
    assignments_from_anchors,
    detect_active_sources,
    enumerate_subsets,
    pit_loss,
    select_attractor_set,
)
from .attractor import (
    danet_train_step,
    estimate_masks,
    form_attractors,
    reconstruction_loss,
    similarity_scores,
    threshold_vector,
)
from .autograd import Tensor
from .checkpoint import Checkpoint, checkpoint_load, checkpoint_save
from .data import (
    DatasetManifest,
    MixtureSpec,
    SourceSpec,
    build_manifest,
    generate_dataset,
    mix_at_snr,
    render_mixture,
    synth_source,
)
from .dsp import (
    ComplexSpectrogram,
    MagnitudeSpectrogram,
    StftConfig,
    Waveform,
    flatten_tf,
    istft,
    log_magnitude,
    magnitude,
    reconstruct,
    stft,
    unflatten_tf,
)
from .inference import (
    AnchoredStrategy,
    FixedStrategy,
    KMeansStrategy,
    fixed_attractors,
    kmeans,
    pca_project,
    separate,
)
from .masks import apply_masks, ibm, irm, wfm
from .metrics import ScoreReport, score_with_permutation, si_snr, si_snr_improvement, snr
from .nn import AdamState, EmbedNet, EmbedNetConfig, adam_step, lr_schedule
from .training import TrainSettings, TrainingDiverged, train
from .wavio import wav_read, wav_write

__version__ = "0.1.0"
