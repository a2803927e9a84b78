"""Adam with decoupled weight decay, mixed-resolution epochs, logging and checkpoints."""
from __future__ import annotations

import csv
import io as _io
import os
from dataclasses import dataclass, field

import numpy as np

from .data import TaskDataset
from .discretization import Discretization
from .errors import IncompatibleCheckpoint, InvalidArgument, NonFiniteError, VersionError
from .io import container_read, container_write
from .layers.auxiliary import NORM_EPS, NormStats, batch_normalization
from .layers.module import Module
from .losses import LossSpec
from .models import build_model
from .tensor import Tensor, backward, make_rng, no_grad

CHECKPOINT_FORMAT = "nokit-checkpoint"
CHECKPOINT_VERSION = 1
LOG_HEADER = ("epoch", "resolution", "train_loss", "lr")


# -- optimizer -----------------------------------------------------------------
@dataclass
class OptimState:
    """Adam moments per parameter name; ``v`` holds ``E|g|^2`` (real) for complex parameters too."""

    lr: float = 1e-3
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.lr > 0 or self.weight_decay < 0:
            raise InvalidArgument("lr must be positive and weight_decay nonnegative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or not self.eps > 0:
            raise InvalidArgument("betas must lie in [0, 1) and eps must be positive")

    def hyper(self) -> dict:
        return {"lr": self.lr, "weight_decay": self.weight_decay, "beta1": self.beta1,
                "beta2": self.beta2, "eps": self.eps, "step": self.step}


def _named(params) -> dict:
    if isinstance(params, Module):
        return params.named_parameters()
    if isinstance(params, dict):
        return dict(params)
    return {p.name if p.name else f"param{i}": p for i, p in enumerate(params)}


def adam_step(params, state: OptimState, grads: dict | None = None) -> OptimState:
    """One bias-corrected Adam update with decoupled weight decay, in place.

    ``params`` is a module, a name-to-parameter dict or a list of named
    parameters; ``grads`` defaults to each parameter's ``.grad``.  Missing
    gradients count as zero.  All gradients are checked before anything is
    updated.
    """
    named = _named(params)
    g_all = {}
    for name, p in named.items():
        if not getattr(p, "trainable", True):
            continue
        g = grads.get(name) if grads is not None else p.grad
        g = np.zeros_like(p.data) if g is None else np.asarray(g)
        if g.shape != p.shape:
            raise InvalidArgument(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient in parameter {name!r}")
        g_all[name] = g
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1, c2 = 1.0 - b1 ** t, 1.0 - b2 ** t
    for name, g in g_all.items():
        p = named[name]
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros(p.shape)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g.real ** 2 + g.imag ** 2 if np.iscomplexobj(g) else g * g)
        state.m[name], state.v[name] = m, v
        update = (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.data = p.data - state.lr * (update + state.weight_decay * p.data)
    return state


# -- configuration ---------------------------------------------------------------
@dataclass(frozen=True)
class TrainConfig:
    """Training knobs.

    ``resolutions`` is either a flat list (every epoch visits each listed
    resolution once, in order) or a list of per-epoch lists; a per-epoch
    schedule shorter than ``epochs`` repeats its last entry.
    """

    epochs: int = 60
    batch_size: int = 8
    lr: float = 1e-3
    weight_decay: float = 1e-4
    lr_halving: int = 20
    resolutions: tuple = (32,)
    loss: LossSpec = field(default_factory=LossSpec)
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        for key in ("epochs", "batch_size", "lr_halving"):
            v = getattr(self, key)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise InvalidArgument(f"{key} must be a positive integer, got {v!r}")
        if not self.lr > 0:
            raise InvalidArgument(f"lr must be positive, got {self.lr}")
        if self.weight_decay < 0:
            raise InvalidArgument(f"weight_decay must be nonnegative, got {self.weight_decay}")
        res = self.resolutions
        if isinstance(res, (int, np.integer)):
            res = (res,)
        if not res:
            raise InvalidArgument("the resolution schedule is empty")
        if all(isinstance(r, (list, tuple)) for r in res):
            res = tuple(tuple(int(x) for x in r) for r in res)
            if any(not r for r in res):
                raise InvalidArgument("every epoch of the schedule needs a resolution")
            flat = [x for r in res for x in r]
        else:
            res = tuple(int(x) for x in res)
            flat = list(res)
        if any(x < 1 for x in flat):
            raise InvalidArgument(f"resolutions must be positive, got {flat}")
        object.__setattr__(self, "resolutions", res)

    def lr_at(self, epoch: int) -> float:
        return self.lr * 0.5 ** (epoch // self.lr_halving)

    def to_dict(self) -> dict:
        res = self.resolutions
        return {"epochs": self.epochs, "batch_size": self.batch_size, "lr": self.lr,
                "weight_decay": self.weight_decay, "lr_halving": self.lr_halving,
                "resolutions": [list(r) for r in res] if isinstance(res[0], tuple) else list(res),
                "loss": self.loss.to_dict(), "seed": self.seed, "shuffle": self.shuffle}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        loss = d.pop("loss", None)
        if isinstance(loss, dict):
            loss = LossSpec(loss.get("weights", {"l2": 1.0}), loss.get("derivative", "fourier"))
        res = d.pop("resolutions", (32,))
        res = tuple(tuple(r) if isinstance(r, list) else r for r in res)
        return cls(resolutions=res, loss=loss if loss is not None else LossSpec(), **d)


def multires_schedule(config: TrainConfig, native_resolution: int | None = None) -> list:
    """Per-epoch lists of ``(resolution, pass)`` pairs.

    Each pair is one full pass over the training samples at that
    resolution, so an epoch with three resolutions takes three times as
    many optimizer steps as a single-resolution epoch.
    """
    res = config.resolutions
    per_epoch = res if isinstance(res[0], tuple) else (res,)
    out = []
    for e in range(config.epochs):
        row = per_epoch[min(e, len(per_epoch) - 1)]
        for r in row:
            if native_resolution is not None and r > native_resolution:
                raise InvalidArgument(f"resolution {r} exceeds the dataset's native resolution {native_resolution}")
        out.append([(r, k) for k, r in enumerate(row)])
    return out


# -- normalization ---------------------------------------------------------------
@dataclass(frozen=True)
class DataNorm:
    """Input and target statistics, computed on the training split only."""

    inputs: NormStats
    targets: NormStats

    @classmethod
    def fit(cls, dataset: TaskDataset) -> "DataNorm":
        disc, f, u = dataset.at_resolution(dataset.native_resolution)
        return cls(batch_normalization(f, disc.weights), batch_normalization(u, disc.weights))

    def scale_in(self, x):
        return (x - self.inputs.mean) / np.maximum(self.inputs.std, NORM_EPS)

    def scale_out(self, y):
        return (y - self.targets.mean) / np.maximum(self.targets.std, NORM_EPS)

    def unscale_out(self, y):
        return y * np.maximum(self.targets.std, NORM_EPS) + self.targets.mean

    def to_dict(self) -> dict:
        return {"inputs": self.inputs.to_dict(), "targets": self.targets.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "DataNorm":
        return cls(NormStats.from_dict(d["inputs"]), NormStats.from_dict(d["targets"]))


class Predictor:
    """A model with its normalization: raw forcing in, raw solution out."""

    def __init__(self, model: Module, norm: DataNorm):
        self.model, self.norm = model, norm

    def __call__(self, values: np.ndarray, disc: Discretization) -> np.ndarray:
        with no_grad():
            out = self.model(Tensor(self.norm.scale_in(values)), disc).data
        return self.norm.unscale_out(out)


# -- training loop ---------------------------------------------------------------
@dataclass
class EpochMetrics:
    epoch: int
    lr: float
    passes: list                # (resolution, mean train loss) per pass
    steps: int

    @property
    def train_loss(self) -> float:
        return float(np.mean([loss for _, loss in self.passes]))


def _batch_loss(model, spec: LossSpec, disc, xb, yb, fb_scaled):
    pred = model(Tensor(xb), disc)
    return spec(pred, yb, disc, inputs=fb_scaled)


def train_epoch(model: Module, dataset: TaskDataset, config: TrainConfig, state: OptimState,
                epoch: int, norm: DataNorm, schedule: list | None = None) -> EpochMetrics:
    """One epoch: shuffled mini-batches at each scheduled resolution.

    Inputs and targets are standardized with ``norm``; the Poisson residual
    term (if any) compares against the forcing divided by the target scale,
    so it is measured in the same units as the data terms.
    """
    schedule = multires_schedule(config, dataset.native_resolution) if schedule is None else schedule
    state.lr = config.lr_at(epoch)
    params = model.named_parameters()
    passes, steps = [], 0
    u_scale = float(np.maximum(norm.targets.std, NORM_EPS)[0])
    for res, k in schedule[epoch]:
        disc, f, u = dataset.at_resolution(res)
        x, y, fs = norm.scale_in(f), norm.scale_out(u), f / u_scale
        n = len(dataset)
        order = make_rng((config.seed, epoch, k)).permutation(n) if config.shuffle else np.arange(n)
        losses = []
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            loss = _batch_loss(model, config.loss, disc, x[idx], y[idx], fs[idx])
            value = float(loss.data)
            if not np.isfinite(value):
                raise NonFiniteError(f"non-finite loss at epoch {epoch}, resolution {res}, batch {b}")
            model.zero_grad()
            backward(loss)
            adam_step(params, state)
            losses.append(value)
            steps += 1
        passes.append((res, float(np.mean(losses))))
    return EpochMetrics(epoch, state.lr, passes, steps)


def format_log_rows(metrics) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for m in metrics:
        for res, loss in m.passes:
            w.writerow([m.epoch, res, repr(loss), repr(m.lr)])
    return buf.getvalue()


@dataclass
class TrainResult:
    model: Module
    state: OptimState
    norm: DataNorm
    history: list

    @property
    def predictor(self) -> Predictor:
        return Predictor(self.model, self.norm)


def train(model: Module, dataset: TaskDataset, config: TrainConfig, log_path=None, checkpoint_path=None,
          resume=None, stop_after: int | None = None, on_epoch=None) -> TrainResult:
    """Run the schedule from epoch 0, or from a loaded checkpoint's next epoch.

    ``log_path`` receives ``epoch,resolution,train_loss,lr`` rows (appended
    when resuming); ``checkpoint_path`` is rewritten after every epoch.
    ``stop_after`` ends the run early after that many epochs in total.
    """
    schedule = multires_schedule(config, dataset.native_resolution)
    if resume is not None:
        norm, state, start, history = resume.norm, resume.state, resume.epoch + 1, list(resume.history)
        model.load_state_dict(resume.model.state_dict())
    else:
        norm = DataNorm.fit(dataset)
        state = OptimState(lr=config.lr, weight_decay=config.weight_decay)
        start, history = 0, []
    end = config.epochs if stop_after is None else min(config.epochs, stop_after)
    if log_path is not None and resume is None:
        with open(log_path, "w", newline="") as fh:
            fh.write(",".join(LOG_HEADER) + "\n")
    for epoch in range(start, end):
        m = train_epoch(model, dataset, config, state, epoch, norm, schedule)
        history.append(m)
        if log_path is not None:
            with open(log_path, "a", newline="") as fh:
                fh.write(format_log_rows([m]))
        if checkpoint_path is not None:
            checkpoint_save(checkpoint_path, model, state, norm=norm, train_config=config, epoch=epoch,
                            history=history)
        if on_epoch is not None:
            on_epoch(m)
    return TrainResult(model, state, norm, history)


# -- checkpoints -----------------------------------------------------------------
@dataclass
class Checkpoint:
    model: Module
    state: OptimState
    norm: DataNorm | None
    train_config: TrainConfig | None
    epoch: int
    history: list
    metadata: dict

    @property
    def predictor(self) -> Predictor:
        if self.norm is None:
            raise InvalidArgument("checkpoint carries no normalization statistics")
        return Predictor(self.model, self.norm)


def checkpoint_save(path, model: Module, state: OptimState, norm: DataNorm | None = None,
                    train_config: TrainConfig | None = None, epoch: int = -1, history=()) -> None:
    """Parameters, Adam moments, normalization, configs and loss history in one container."""
    if not hasattr(model, "config"):
        raise InvalidArgument("only models with a config() can be checkpointed")
    entries = []
    for name, p in model.named_parameters().items():
        entries.append((f"param/{name}", p.data))
    for name in sorted(state.m):
        entries.append((f"adam_m/{name}", state.m[name]))
        entries.append((f"adam_v/{name}", state.v[name]))
    meta = {
        "format": CHECKPOINT_FORMAT,
        "checkpoint_version": CHECKPOINT_VERSION,
        "model": model.config(),
        "optim": state.hyper(),
        "norm": None if norm is None else norm.to_dict(),
        "train": None if train_config is None else train_config.to_dict(),
        "epoch": int(epoch),
        "history": [{"epoch": m.epoch, "lr": m.lr, "passes": [list(p) for p in m.passes], "steps": m.steps}
                    for m in history],
    }
    container_write(path, entries, meta)


def checkpoint_load(path) -> Checkpoint:
    """Restore a checkpoint bitwise; version or layout mismatches raise :class:`IncompatibleCheckpoint`."""
    try:
        c = container_read(path)
    except VersionError as exc:
        raise IncompatibleCheckpoint(str(exc)) from exc
    meta = c.metadata
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise IncompatibleCheckpoint(f"{os.fspath(path)} is not a checkpoint")
    if meta.get("checkpoint_version") != CHECKPOINT_VERSION:
        raise IncompatibleCheckpoint(
            f"checkpoint version {meta.get('checkpoint_version')}, this build reads {CHECKPOINT_VERSION}")
    try:
        model = build_model(meta["model"])
    except (TypeError, InvalidArgument) as exc:
        raise IncompatibleCheckpoint(f"cannot rebuild the model: {exc}") from exc
    params = model.named_parameters()
    stored = {k[len("param/"):]: v for k, v in c.arrays.items() if k.startswith("param/")}
    if set(stored) != set(params):
        raise IncompatibleCheckpoint("checkpoint parameters do not match the model layout")
    for name, p in params.items():
        if stored[name].shape != p.shape:
            raise IncompatibleCheckpoint(f"parameter {name} has shape {stored[name].shape}, expected {p.shape}")
        p.assign(stored[name])
    o = meta["optim"]
    state = OptimState(lr=o["lr"], weight_decay=o["weight_decay"], beta1=o["beta1"], beta2=o["beta2"],
                       eps=o["eps"], step=o["step"])
    for key, arr in c.arrays.items():
        if key.startswith("adam_m/"):
            name = key[len("adam_m/"):]
            state.m[name] = arr if params[name].is_complex else arr.real
            state.v[name] = c.arrays[f"adam_v/{name}"]
    norm = None if meta.get("norm") is None else DataNorm.from_dict(meta["norm"])
    tc = None if meta.get("train") is None else TrainConfig.from_dict(meta["train"])
    history = [EpochMetrics(h["epoch"], h["lr"], [tuple(p) for p in h["passes"]], h["steps"])
               for h in meta.get("history", [])]
    return Checkpoint(model, state, norm, tc, int(meta.get("epoch", -1)), history, meta)


__all__ = [
    "OptimState", "adam_step", "TrainConfig", "multires_schedule", "DataNorm", "Predictor",
    "EpochMetrics", "train_epoch", "train", "TrainResult", "Checkpoint", "checkpoint_save",
    "checkpoint_load", "format_log_rows", "LOG_HEADER",
]
