"""Curriculum training loop with validation-driven scheduling.

Training runs in two phases: short input chunks first, then long chunks
with the learning rate restarted at a lower value.  Within each phase the
rate is halved after 3 epochs without a new best validation loss; phase
one ends after 5 such epochs (or its epoch cap), phase two stops after 10
(or its cap).  The checkpoint written every epoch carries the full
optimizer and scheduler state, so an interrupted run resumed from disk
retraces the uninterrupted trajectory bit for bit.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adanet import adanet_loss, adanet_train_step
from .attractor import danet_loss, danet_train_step, form_attractors, threshold_vector
from .checkpoint import Checkpoint, checkpoint_load, checkpoint_save
from .dsp import Waveform, flatten_tf, log_magnitude, magnitude, stft
from .inference import fixed_attractors
from .masks import ibm
from .nn import AdamState, EmbedNet, EmbedNetConfig, adam_step, lr_schedule
from .wavio import wav_read

__all__ = ["TrainSettings", "TrainingDiverged", "train", "load_corpus"]


class TrainingDiverged(RuntimeError):
    """Raised when the loss goes non-finite; message records the step."""


@dataclass
class TrainSettings:
    model: str = "danet"              # danet | adanet
    anchors: int = 6                  # adanet anchor count
    slots: int | None = None          # adanet output slots; default max C in data
    q: float = 0.9
    lr: float = 1e-3                  # short-chunk phase
    lr_long: float = 1e-4             # long-chunk phase restart
    chunk_short: int = 100
    chunk_long: int = 400
    epochs_short: int = 4             # per-phase epoch caps
    epochs_long: int = 2
    patience_switch: int = 5
    patience_stop: int = 10
    patience_lr: int = 3
    context: int = 2
    hidden_sizes: tuple = (128, 128)
    embed_dim: int = 20
    mask_nl: str = "softmax"
    seed: int = 0
    stop_after_epochs: int | None = None   # interrupt cleanly after N global epochs

    def embed_config(self, n_freq: int = 129) -> EmbedNetConfig:
        return EmbedNetConfig(
            context=self.context,
            hidden_sizes=tuple(self.hidden_sizes),
            embed_dim=self.embed_dim,
            n_freq=n_freq,
            mask_nl=self.mask_nl,
        )


def load_corpus(rows: list) -> list:
    """Read the waveforms behind dataset index rows into memory."""
    corpus = []
    for row in rows:
        mix = wav_read(row["mixture_path"])
        srcs = [wav_read(p) for p in row["source_paths"]]
        corpus.append({"mix": mix, "sources": srcs, "C": len(srcs)})
    return corpus


def _utterance_mags(item: dict) -> tuple:
    """Per-utterance magnitude spectrograms: (mix F x T, sources C x F x T)."""
    mix_mag = magnitude(stft(item["mix"])).values
    src_mags = np.stack([magnitude(stft(s)).values for s in item["sources"]])
    return mix_mag, src_mags


def _chunks(n_frames: int, length: int) -> list:
    """Non-overlapping chunk starts; a short utterance is one whole chunk."""
    if n_frames <= length:
        return [(0, n_frames)]
    return [(s, length) for s in range(0, n_frames - length + 1, length)]


def _loss_value(net, settings, slots, mix_mag, src_mags) -> float:
    if settings.model == "adanet":
        loss, _, _ = adanet_loss(net, mix_mag, src_mags, slots, settings.q)
    else:
        loss = danet_loss(net, mix_mag, src_mags, settings.q)
    return loss.item()


def _validation_loss(net, settings, slots, corpus) -> float:
    """Mean per-bin loss over the validation utterances, fixed order."""
    total = 0.0
    for item in corpus:
        mix_mag, src_mags = _utterance_mags(item)
        loss = _loss_value(net, settings, slots, mix_mag, src_mags)
        total += loss / mix_mag.size
    return total / len(corpus)


def _fixed_attractor_table(net, settings, corpus, slots) -> np.ndarray | None:
    """Average the oracle-assignment attractors of matching train utterances."""
    sets = []
    for item in corpus:
        if item["C"] != slots:
            continue
        mix_mag, src_mags = _utterance_mags(item)
        v = net.embed(log_magnitude(mix_mag)).data
        w = threshold_vector(flatten_tf(mix_mag), settings.q)
        y = ibm(np.stack([flatten_tf(s) for s in src_mags]))
        try:
            sets.append(form_attractors(v, y, w))
        except ValueError:
            continue
    return fixed_attractors(sets) if sets else None


def train(
    train_rows: list,
    val_rows: list,
    settings: TrainSettings,
    ckpt_path,
    log_path,
    resume: bool = False,
) -> Checkpoint:
    """Train a model over the corpus, writing a checkpoint and a CSV log.

    With ``resume=True`` the checkpoint at ``ckpt_path`` is loaded and
    training continues from its stored epoch; the log file is appended.
    Returns the final checkpoint (best parameters included).
    """
    ckpt_path = Path(ckpt_path)
    log_path = Path(log_path)
    train_corpus = load_corpus(train_rows)
    val_corpus = load_corpus(val_rows)
    if not train_corpus or not val_corpus:
        raise ValueError("training and validation splits must be non-empty")
    slots = settings.slots or max(item["C"] for item in train_corpus)
    n_freq = 129

    if resume:
        ckpt = checkpoint_load(ckpt_path)
        net = ckpt.build_net(best=False)
        opt = ckpt.build_adam()
        best_arrays = {
            name[len("best/"):]: arr.copy()
            for name, arr in ckpt.arrays.items()
            if name.startswith("best/")
        }
        best_val = ckpt.best_val_loss
        state = dict(ckpt.trainer)
        epoch = ckpt.epoch
        log_fh = open(log_path, "a")
    else:
        n_anchors = settings.anchors if settings.model == "adanet" else 0
        net = EmbedNet(settings.embed_config(n_freq), seed=settings.seed,
                       n_anchors=n_anchors)
        opt = AdamState(lr=settings.lr)
        best_arrays = {name: p.data.copy() for name, p in net.params.items()}
        best_val = None
        state = {"phase": 1, "epoch_in_phase": 0, "since_best": 0,
                 "since_best_lr": 0, "done": False}
        epoch = 0
        log_fh = open(log_path, "w")
        log_fh.write("epoch,phase,lr,train_loss,val_loss,new_best\n")

    def write_checkpoint():
        arrays = {}
        for name, p in net.params.items():
            arrays[f"param/{name}"] = p.data.copy()
        for name in net.params:
            arrays[f"adam_m/{name}"] = opt.m.get(name, np.zeros_like(net.params[name].data)).copy()
            arrays[f"adam_v/{name}"] = opt.v.get(name, np.zeros_like(net.params[name].data)).copy()
        for name, arr in best_arrays.items():
            arrays[f"best/{name}"] = arr.copy()
        if state.get("fixed_table") is not None:
            arrays["fixed_attractors"] = np.asarray(state["fixed_table"])
        ckpt = Checkpoint(
            model_kind=settings.model,
            config=net.config,
            n_anchors=net.n_anchors,
            slots=slots if settings.model == "adanet" else max(
                item["C"] for item in train_corpus),
            arrays=arrays,
            adam={"lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2,
                  "eps": opt.eps, "step": opt.step},
            epoch=epoch,
            best_val_loss=best_val,
            trainer={k: v for k, v in state.items() if k != "fixed_table"},
        )
        checkpoint_save(ckpt, ckpt_path)
        return ckpt

    try:
        while not state["done"]:
            if (settings.stop_after_epochs is not None
                    and epoch >= settings.stop_after_epochs):
                break
            epoch += 1
            state["epoch_in_phase"] += 1
            chunk_len = (settings.chunk_short if state["phase"] == 1
                         else settings.chunk_long)
            lr_this_epoch = opt.lr

            order = []
            for utt_idx, item in enumerate(train_corpus):
                n_frames = 1 + (len(item["mix"]) - 256) // 64
                for start, length in _chunks(n_frames, chunk_len):
                    order.append((utt_idx, start, length))
            rng = np.random.default_rng(
                np.random.SeedSequence([settings.seed, epoch]))
            rng.shuffle(order)

            train_loss = 0.0
            for step, (utt_idx, start, length) in enumerate(order):
                mix_mag, src_mags = _utterance_mags(train_corpus[utt_idx])
                mix_chunk = mix_mag[:, start : start + length]
                src_chunk = src_mags[:, :, start : start + length]
                if settings.model == "adanet":
                    loss, _, _ = adanet_train_step(
                        net, opt, mix_chunk, src_chunk, slots, settings.q)
                else:
                    loss = danet_train_step(
                        net, opt, mix_chunk, src_chunk, settings.q)
                if not np.isfinite(loss):
                    raise TrainingDiverged(
                        f"non-finite loss at epoch {epoch}, step {step}")
                train_loss += loss / mix_chunk.size
            train_loss /= max(len(order), 1)

            val_loss = _validation_loss(net, settings, slots, val_corpus)
            if not np.isfinite(val_loss):
                raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")

            improved = best_val is None or val_loss < best_val
            if improved:
                best_val = val_loss
                best_arrays = {name: p.data.copy() for name, p in net.params.items()}
                state["since_best"] = 0
                state["since_best_lr"] = 0
            else:
                state["since_best"] += 1
                state["since_best_lr"] += 1

            log_fh.write(
                f"{epoch},{state['phase']},{lr_this_epoch!r},"
                f"{train_loss!r},{val_loss!r},{int(improved)}\n"
            )
            log_fh.flush()

            if state["since_best_lr"] >= settings.patience_lr:
                lr_schedule(opt, state["since_best_lr"])
                state["since_best_lr"] = 0

            if state["phase"] == 1:
                if (state["since_best"] >= settings.patience_switch
                        or state["epoch_in_phase"] >= settings.epochs_short):
                    state["phase"] = 2
                    state["epoch_in_phase"] = 0
                    state["since_best"] = 0
                    state["since_best_lr"] = 0
                    opt.lr = settings.lr_long
            else:
                if (state["since_best"] >= settings.patience_stop
                        or state["epoch_in_phase"] >= settings.epochs_long):
                    state["done"] = True

            write_checkpoint()
    finally:
        log_fh.close()

    # Table of averaged oracle attractors for the fixed-attractor strategy.
    if settings.model == "danet":
        best_net = EmbedNet(net.config, seed=0, n_anchors=net.n_anchors)
        for name in best_net.params:
            best_net.params[name].data = best_arrays[name].copy()
        table_slots = max(item["C"] for item in train_corpus)
        state["fixed_table"] = _fixed_attractor_table(
            best_net, settings, train_corpus, table_slots)
    return write_checkpoint()
