"""Batch entry points.

``nokit <command> [--config FILE] [--seed N] [--out DIR] ...`` with commands
``gen-data``, ``train``, ``eval-sweep``, ``drift-test``, ``collapse-demo``
and ``quad-check``.  Each run writes its artifacts and a ``manifest.json``
(config hash, seed, versions, output checksums) into the output directory.

Exit codes: 0 success, 1 invalid input (config, arguments), 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import os
import platform
import sys

import numpy as np
import scipy

from . import __version__
from . import config as cfgmod
from .data import GrfSpec, TaskDataset, generate_dataset
from .discretization import Domain, delaunay_weights_2d, refine, uniform_grid
from .errors import ConfigError, InvalidArgument, NokitError
from .evaluation import (
    discretization_convergence_test, knn_gno_contrast, layer_operator, receptive_field_collapse_demo,
    resolution_sweep, sweep_csv, _csv,
)
from .io import checksum
from .layers import AttentionLayer, EncDecConfig, EncDecLayer, IntegralTransform, KernelNet, SpectralConv
from .losses import LossSpec
from .models import build_model
from .training import TrainConfig, checkpoint_load, train

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
COMMANDS = ("gen-data", "train", "eval-sweep", "drift-test", "collapse-demo", "quad-check")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nokit", description="Neural operator experiments on the torus.")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    def common(sp, out_default):
        sp.add_argument("--config", help="TOML config file (defaults apply when omitted)")
        sp.add_argument("--seed", type=int, help="override every seed in the config")
        sp.add_argument("--out", default=out_default, help="run directory")

    common(sub.add_parser("gen-data", help="draw forcings and Poisson solutions"), "runs/gen-data")
    t = sub.add_parser("train", help="train the configured model")
    common(t, "runs/train")
    t.add_argument("--data", help="dataset file (overrides data.path)")
    t.add_argument("--resume", help="checkpoint to continue from")
    e = sub.add_parser("eval-sweep", help="relative L2 error per resolution")
    common(e, "runs/eval")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", help="dataset file (overrides data.path)")
    common(sub.add_parser("drift-test", help="discretization-convergence drift of one layer"), "runs/drift")
    common(sub.add_parser("collapse-demo", help="stencil vs fixed-radius operator under refinement"),
           "runs/collapse")
    q = sub.add_parser("quad-check", help="print Delaunay weights of the unit-square corners")
    q.add_argument("--out", default=None, help="optional run directory")
    return p


# -- builders --------------------------------------------------------------------
def _invalid(key):
    """Re-raise InvalidArgument from a builder as a ConfigError naming ``key``."""
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, tp, exc, tb):
            if exc is not None and isinstance(exc, (InvalidArgument, TypeError)) and not isinstance(exc, ConfigError):
                raise ConfigError(key, str(exc)) from exc
            return False
    return _Ctx()


def grf_spec(cfg) -> GrfSpec:
    d = cfg["data"]
    with _invalid("data"):
        spec = GrfSpec(d["sigma"], d["tau"], d["alpha"], d["seed"])
        if spec.alpha <= 1.0:
            raise ConfigError("data.alpha", f"must exceed 1 in 2D, got {spec.alpha}")
    return spec


def make_dataset(cfg, path=None) -> TaskDataset:
    path = path or cfg["data"]["path"]
    if path:
        return TaskDataset.load(path)
    d = cfg["data"]
    with _invalid("data"):
        return generate_dataset(grf_spec(cfg), d["resolution"], d["count"], d["seed"], band_limit=d["band_limit"])


def model_config(cfg) -> dict:
    m = cfg["model"]
    common = {"width": m["width"], "blocks": m["blocks"], "num_frequencies": m["num_frequencies"],
              "proj_hidden": m["proj_hidden"]}
    if m["kind"] == "fno":
        return {"kind": "fno", "modes": m["modes"], **common}
    if m["kind"] == "convnet":
        return {"kind": "convnet", "k": m["k"], **common}
    raise ConfigError("model.kind", f"unknown model kind {m['kind']!r}; expected fno or convnet")


def train_config(cfg) -> TrainConfig:
    t = cfg["training"]
    with _invalid("training.loss"):
        loss = LossSpec(t["loss"], t["derivative"])
    res = t["resolutions"]
    if not res or not all(isinstance(r, int) for r in res) and not all(isinstance(r, list) for r in res):
        raise ConfigError("training.resolutions", "expected a list of integers or a list of lists")
    with _invalid("training"):
        return TrainConfig(epochs=t["epochs"], batch_size=t["batch_size"], lr=t["lr"],
                           weight_decay=t["weight_decay"], lr_halving=t["lr_halving"],
                           resolutions=tuple(tuple(r) if isinstance(r, list) else r for r in res),
                           loss=loss, seed=t["seed"], shuffle=t["shuffle"])


def _apply_seed(cfg, seed):
    if seed is not None:
        for table in ("data", "model", "training", "drift"):
            cfg[table]["seed"] = int(seed)
    return cfg


# -- manifest --------------------------------------------------------------------
def versions() -> dict:
    return {"nokit": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_manifest(out_dir, command: str, cfg: dict, seed, outputs) -> str:
    files = {}
    for name in outputs:
        with open(os.path.join(out_dir, name), "rb") as fh:
            files[name] = f"{checksum(fh.read()):016x}"
    manifest = {"command": command, "config_hash": cfgmod.config_hash(cfg), "seed": seed,
                "versions": versions(), "config": cfg, "outputs": files}
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _text(out_dir, name, text):
    with open(os.path.join(out_dir, name), "w", newline="") as fh:
        fh.write(text)


# -- commands --------------------------------------------------------------------
def cmd_gen_data(cfg, args, out):
    path = os.path.join(out, "dataset.nopk")
    d = cfg["data"]
    with _invalid("data"):
        generate_dataset(grf_spec(cfg), d["resolution"], d["count"], d["seed"], path=path,
                         band_limit=d["band_limit"])
    print(f"wrote {d['count']} samples at {d['resolution']}^2 to {path}")
    return ["dataset.nopk"]


def cmd_train(cfg, args, out):
    ds = make_dataset(cfg, args.data)
    n_train = cfg["data"]["n_train"]
    with _invalid("data.n_train"):
        train_ds, _ = ds.split(n_train) if n_train < len(ds) else (ds, None)
    tc = train_config(cfg)
    with _invalid("training.resolutions"):
        for r in {x for row in (tc.resolutions if isinstance(tc.resolutions[0], tuple) else [tc.resolutions])
                  for x in row}:
            ds.check_resolution(r)
    with _invalid("model"):
        model = build_model(model_config(cfg), seed=cfg["model"]["seed"])
    resume = checkpoint_load(args.resume) if args.resume else None
    ckpt = os.path.join(out, "checkpoint.nopk")
    log = os.path.join(out, "train_log.csv")
    if resume is not None and os.path.abspath(args.resume) != os.path.abspath(ckpt):
        import shutil
        shutil.copyfile(os.path.join(os.path.dirname(args.resume), "train_log.csv"), log)

    def report(m):
        print(f"epoch {m.epoch}: loss {m.train_loss:.6g} lr {m.lr:g}", flush=True)

    train(model, train_ds, tc, log_path=log, checkpoint_path=ckpt, resume=resume, on_epoch=report)
    return ["checkpoint.nopk", "train_log.csv"]


def cmd_eval_sweep(cfg, args, out):
    ck = checkpoint_load(args.checkpoint)
    ds = make_dataset(cfg, args.data)
    n_train = cfg["data"]["n_train"]
    test = ds.split(n_train)[1] if n_train < len(ds) else ds
    ev = cfg["eval"]
    with _invalid("eval.resolutions"):
        for r in ev["resolutions"]:
            ds.check_resolution(r)
    name = ev["model_name"] or ck.metadata["model"]["kind"]
    rows = resolution_sweep(ck.predictor, test, ev["resolutions"], name, ev["batch"])
    text = sweep_csv(rows)
    _text(out, "sweep.csv", text)
    sys.stdout.write(text)
    return ["sweep.csv"]


def drift_layer(cfg):
    d = cfg["drift"]
    seed = d["seed"]
    kind = d["layer"]
    if kind == "integral_transform":
        return IntegralTransform(KernelNet([2, 16, 1], "gelu", seed=seed))
    if kind == "spectral_conv":
        return SpectralConv(1, 1, 8, dim=1, seed=seed)
    if kind == "attention":
        return AttentionLayer(1, 8, 1, seed=seed)
    if kind == "encdec":
        return EncDecLayer(EncDecConfig(), 1, 1, 1, seed=seed)
    raise ConfigError("drift.layer", f"unknown layer {kind!r}")


def band_limited_tests():
    return [lambda x: np.sin(2 * np.pi * x[:, :1]) + 0.5 * np.cos(4 * np.pi * x[:, :1]),
            lambda x: np.cos(2 * np.pi * x[:, :1]) - 0.3 * np.sin(6 * np.pi * x[:, :1])]


def cmd_drift(cfg, args, out):
    d = cfg["drift"]
    if d["levels"] < 3 or d["n0"] < 2:
        raise ConfigError("drift.levels", "a drift test needs n0 >= 2 and at least 3 refinements")
    if d["layer"] == "knn":
        contrast = knn_gno_contrast()
        _text(out, "drift.csv", contrast.knn.csv())
        _text(out, "drift_gno.csv", contrast.gno.csv())
        print(contrast.knn.csv() + f"# knn plateau {contrast.knn_plateau:.3e}, gno final {contrast.gno_final:.3e}")
        return ["drift.csv", "drift_gno.csv"]
    layer = drift_layer(cfg)
    chain = refine(uniform_grid(Domain("torus1d"), d["n0"]), d["levels"])
    report = discretization_convergence_test(layer_operator(layer), band_limited_tests(), chain)
    _text(out, "drift.csv", report.csv())
    print(report.csv() + f"# nonincreasing within slack: {report.nonincreasing}")
    return ["drift.csv"]


def cmd_collapse(cfg, args, out):
    c = cfg["collapse"]
    taps = c["taps"]
    if len(taps) % 2 == 0 or not taps:
        raise ConfigError("collapse.taps", "need an odd number of taps")
    if not c["radius"] > 0:
        raise ConfigError("collapse.radius", "must be positive")
    chain = refine(uniform_grid(Domain("torus1d"), c["n0"]), c["levels"])
    rep = receptive_field_collapse_demo(taps, chain, radius=c["radius"])
    text = _csv(("n", "conv_to_pointwise", "operator_to_limit"), rep.rows())
    _text(out, "collapse.csv", text)
    print(text + f"# separation of the limits: {rep.separation:.6g}")
    return ["collapse.csv"]


def cmd_quad(cfg, args, out):
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    w = delaunay_weights_2d(pts)
    lines = ["x,y,weight"] + [f"{p[0]:g},{p[1]:g},{float(v)!r}" for p, v in zip(pts, w)]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if out is not None:
        _text(out, "quad.csv", text)
        return ["quad.csv"]
    return []


HANDLERS = {"gen-data": cmd_gen_data, "train": cmd_train, "eval-sweep": cmd_eval_sweep,
            "drift-test": cmd_drift, "collapse-demo": cmd_collapse, "quad-check": cmd_quad}


def run(argv=None) -> int:
    """Parse ``argv`` and run one command; returns the exit code."""
    try:
        args = _parser().parse_args(argv)
        cfg_path = getattr(args, "config", None)
        cfg = cfgmod.load(cfg_path) if cfg_path else cfgmod.merge({})
        cfg = _apply_seed(cfg, getattr(args, "seed", None))
        out = args.out
        if out is not None:
            os.makedirs(out, exist_ok=True)
        outputs = HANDLERS[args.command](cfg, args, out)
        if out is not None:
            write_manifest(out, args.command, cfg, getattr(args, "seed", None), outputs)
        return EXIT_OK
    except UsageError as exc:
        print(f"nokit: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConfigError as exc:
        print(f"nokit: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NokitError, OSError, ValueError, FloatingPointError) as exc:
        print(f"nokit: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
