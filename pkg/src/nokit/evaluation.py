"""Resolution sweeps, discretization-convergence drift, receptive-field collapse and error decomposition.

Models are evaluated through *predictors*: callables mapping raw input
values ``(B, n, c)`` on a discretization to raw outputs ``(B, n, c')``.
:class:`~nokit.training.Predictor` wraps a trained model with its
normalization; :class:`PoissonOracle` is the exact solver.
"""
from __future__ import annotations

import csv
import io as _io
from dataclasses import dataclass, field

import numpy as np

from .baselines import KnnGnnLayer
from .data import TaskDataset, poisson_solve
from .discretization import Discretization, Domain, Field, RefinementChain, point_cloud, uniform_grid
from .errors import InvalidArgument
from .layers.common import apply_to_field
from .layers.conv import discrete_conv
from .layers.integral import ConvOperator, IntegralTransform
from .layers.module import FixedKernel
from .tensor import no_grad

SWEEP_HEADER = ("resolution", "model", "rel_l2_mean", "rel_l2_std", "n_samples")
DRIFT_HEADER = ("level", "n", "drift_l2")
DRIFT_SLACK = 0.10
# drifts at round-off level are compared with this absolute allowance
DRIFT_ATOL = 1e-12
DECOMPOSITION_SLACK = 0.20


def _csv(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _write(path, text: str):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def weighted_norm(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Per-sample ``sqrt(sum_j |v_j|^2 Delta_j)`` for ``(B, n, c)`` values."""
    v = np.asarray(values)
    return np.sqrt(np.einsum("bnc,n->b", np.abs(v) ** 2, weights))


def per_sample_relative_l2(pred: np.ndarray, target: np.ndarray, weights: np.ndarray) -> np.ndarray:
    den = weighted_norm(target, weights)
    if np.any(den <= 0):
        raise InvalidArgument("relative L2 error is undefined for a zero-norm target")
    return weighted_norm(pred - target, weights) / den


def predict(predictor, values: np.ndarray, disc: Discretization, batch: int = 16) -> np.ndarray:
    """Apply ``predictor`` in fixed-size chunks (results do not depend on ``batch`` order)."""
    outs = [predictor(values[i:i + batch], disc) for i in range(0, len(values), batch)]
    return np.concatenate(outs, axis=0)


class PoissonOracle:
    """The exact solution operator wrapped as a predictor."""

    def __call__(self, values: np.ndarray, disc: Discretization) -> np.ndarray:
        return np.stack([poisson_solve(Field(disc, v)).values for v in values])


# -- resolution sweep ------------------------------------------------------------
@dataclass(frozen=True)
class SweepRow:
    resolution: int
    model: str
    rel_l2_mean: float
    rel_l2_std: float
    n_samples: int

    def as_tuple(self):
        return (self.resolution, self.model, self.rel_l2_mean, self.rel_l2_std, self.n_samples)


@dataclass
class EvalReport:
    """Sweep rows, drift sequences and error-decomposition entries, whichever were measured."""

    rows: list = field(default_factory=list)
    drift: list = field(default_factory=list)
    decomposition: "DecompositionReport | None" = None

    def sweep_csv(self) -> str:
        return sweep_csv(self.rows)


def resolution_sweep(predictor, dataset: TaskDataset, resolutions, model_name: str = "model",
                     batch: int = 16) -> list:
    """Mean and std of the per-sample relative L2 error at each resolution (ascending)."""
    rows = []
    for res in sorted(set(int(r) for r in resolutions)):
        disc, f, u = dataset.at_resolution(res)
        err = per_sample_relative_l2(predict(predictor, f, disc, batch), u, disc.weights)
        rows.append(SweepRow(res, model_name, float(err.mean()), float(err.std()), int(len(err))))
    return rows


def sweep_csv(rows) -> str:
    return _csv(SWEEP_HEADER, [r.as_tuple() for r in rows])


def write_sweep_csv(path, rows) -> None:
    _write(path, sweep_csv(rows))


# -- discretization convergence --------------------------------------------------
@dataclass
class DriftReport:
    """``drifts[k] = ||M(f|X_{k+1}) - M(f|X_k)||`` on the points of ``X_k``, max over test functions."""

    sizes: list
    drifts: list
    slack: float = DRIFT_SLACK
    atol: float = DRIFT_ATOL

    @property
    def nonincreasing(self) -> bool:
        d = self.drifts
        return all(b <= (1.0 + self.slack) * a + self.atol for a, b in zip(d, d[1:]))

    def rows(self):
        return [(k, self.sizes[k], float(v)) for k, v in enumerate(self.drifts)]

    def csv(self) -> str:
        return _csv(DRIFT_HEADER, self.rows())


def _as_operator(op):
    """Field -> Field from a layer-like callable taking ``(values, disc)`` or a Field."""
    def run(field: Field) -> Field:
        out = op(field)
        if isinstance(out, Field):
            return out
        return Field(field.disc, np.asarray(out.data if hasattr(out, "data") else out)[0])
    return run


def discretization_convergence_test(operator, functions, chain: RefinementChain) -> DriftReport:
    """Drift of ``operator`` along a nested chain.

    ``operator`` maps a Field to a Field on the same points (use
    :func:`layer_operator` for tensor layers); ``functions`` is a callable
    or a list of callables mapping ``(n, d)`` points to ``(n, c)`` values.
    Nested chains store the coarse points first, so the common query
    points of two levels are the first ``n_k`` rows.
    """
    if len(chain) < 4:
        raise InvalidArgument(f"a drift test needs at least 4 levels, got {len(chain)}")
    fns = functions if isinstance(functions, (list, tuple)) else [functions]
    run = _as_operator(operator)
    drifts = np.zeros(len(chain) - 1)
    for fn in fns:
        outs = []
        for disc in chain:
            vals = np.asarray(fn(disc.points), dtype=np.float64)
            outs.append(run(Field(disc, vals.reshape(disc.n, -1))).values)
        for k in range(len(chain) - 1):
            coarse = chain[k]
            diff = outs[k + 1][: coarse.n] - outs[k]
            drifts[k] = max(drifts[k], float(weighted_norm(diff[None], coarse.weights)[0]))
    return DriftReport([d.n for d in chain], drifts.tolist())


def layer_operator(layer):
    """Field -> Field wrapper for a layer called as ``layer(values, disc)``."""
    return lambda field: apply_to_field(lambda f: layer(f, field.disc), field)


def skewed_chain(n0: int = 16, levels: int = 8) -> RefinementChain:
    """Nested 1D torus clouds refined alternately in the left and right halves.

    Starting from ``n0`` equispaced points, odd levels add the midpoints of
    the left half (which then has twice the density of the right half) and
    even levels those of the right half (uniform again), so the sizes run
    16, 24, 32, 48, 64, ... and the local density keeps flipping.
    """
    dom = Domain("torus1d")
    pts = np.arange(n0) / n0
    levels_out = [point_cloud(dom, pts[:, None], rule="riemann")]
    spacing = 1.0 / n0
    for k in range(levels):
        left = k % 2 == 0
        lo = 0.0 if left else 0.5
        m = int(round(0.5 / spacing))
        new = lo + (np.arange(m) + 0.5) * spacing
        pts = np.concatenate([pts, new])
        if not left:
            spacing /= 2
        levels_out.append(point_cloud(dom, pts[:, None], rule="riemann"))
    return RefinementChain(tuple(levels_out))


@dataclass
class KnnContrast:
    knn: DriftReport
    gno: DriftReport

    @property
    def knn_plateau(self) -> float:
        """Smallest drift over the second half of the chain."""
        d = self.knn.drifts
        return float(min(d[len(d) // 2:]))

    @property
    def gno_final(self) -> float:
        return float(self.gno.drifts[-1])


def gaussian_kernel(width: float = 0.15):
    """Smooth periodic-distance kernel ``exp(-d^2 / (2 w^2))`` on ``x ⊕ y`` pairs."""
    def k(xy):
        x, y = xy[:, :1], xy[:, 1:]
        d = x - y
        d = d - np.round(d)
        return np.exp(-0.5 * (d / width) ** 2)
    return FixedKernel(k, out_dim=1)


def knn_gno_contrast(chain: RefinementChain | None = None, functions=None, neighbor_fraction: float = 0.5,
                     width: float = 0.15) -> KnnContrast:
    """Mean aggregation over the ``fraction * n`` nearest neighbours vs a quadrature integral.

    Both layers use the same smooth kernel message; only the aggregation
    weights differ (``1 / k`` vs quadrature weights).
    """
    chain = skewed_chain() if chain is None else chain
    if functions is None:
        functions = [lambda x: np.sin(2 * np.pi * x[:, :1]) + 0.5 * np.cos(4 * np.pi * x[:, :1])]
    kernel = gaussian_kernel(width)

    def knn_op(field: Field) -> Field:
        k = max(1, int(round(neighbor_fraction * field.disc.n)))
        layer = KnnGnnLayer(k, kernel)
        return apply_to_field(lambda f: layer(f, field.disc), field)

    gno = IntegralTransform(kernel)
    return KnnContrast(discretization_convergence_test(knn_op, functions, chain),
                       discretization_convergence_test(layer_operator(gno), functions, chain))


# -- receptive-field collapse ----------------------------------------------------
@dataclass
class CollapseReport:
    sizes: list
    conv_to_pointwise: list      # ||discrete_conv(f) - f sum K|| per level
    operator_to_limit: list      # ||conv_operator(f) - limit|| per level
    separation: float            # ||f sum K - limit|| on the finest level

    def rows(self):
        return list(zip(self.sizes, self.conv_to_pointwise, self.operator_to_limit))


def box_average_sine(y: np.ndarray, radius: float) -> np.ndarray:
    """Exact ``(1 / 2r) int_{y-r}^{y+r} sin(2 pi x) dx``."""
    return np.sin(2 * np.pi * y) * np.sin(2 * np.pi * radius) / (2 * np.pi * radius)


def receptive_field_collapse_demo(taps, chain: RefinementChain | None = None, f=None, radius: float = 0.25,
                                  limit=None) -> CollapseReport:
    """Index-based stencil vs a fixed-radius box-kernel operator along a refinement chain.

    The stencil's output tends to the pointwise map ``f * sum(taps)``; the
    operator with kernel ``1 / (2r)`` on ``|d| <= r`` tends to the windowed
    average ``limit(y)`` (the exact sine average by default).  The
    separation is the L2 distance between the two limits.
    """
    if chain is None:
        from .discretization import refine
        chain = refine(uniform_grid(Domain("torus1d"), 16), 6)
    if f is None:
        f = lambda x: np.sin(2 * np.pi * x[:, 0])
        if limit is None:
            limit = lambda x: box_average_sine(x[:, 0], radius)
    taps = np.asarray(taps, dtype=np.float64)
    total = float(taps.sum())
    op = ConvOperator(lambda d: np.full((len(d.data), 1), 1.0 / (2 * radius)), radius)
    to_pointwise, to_limit = [], []
    for disc in chain:
        vals = np.asarray(f(disc.points), dtype=np.float64).reshape(disc.n, 1)
        with no_grad():
            g = discrete_conv(vals, disc, taps, "direct").data[0]
            h = op(vals, disc).data[0]
        to_pointwise.append(float(weighted_norm((g - total * vals)[None], disc.weights)[0]))
        if limit is not None:
            ref = np.asarray(limit(disc.points), dtype=np.float64).reshape(disc.n, 1)
            to_limit.append(float(weighted_norm((h - ref)[None], disc.weights)[0]))
    finest = chain[len(chain) - 1]
    vals = np.asarray(f(finest.points), dtype=np.float64).reshape(finest.n, 1)
    if limit is not None:
        ref = np.asarray(limit(finest.points), dtype=np.float64).reshape(finest.n, 1)
    else:
        with no_grad():
            ref = op(vals, finest).data[0]
        to_limit = []
    sep = float(weighted_norm((total * vals - ref)[None], finest.weights)[0])
    return CollapseReport([d.n for d in chain], to_pointwise, to_limit, sep)


# -- error decomposition ---------------------------------------------------------
@dataclass
class DecompositionReport:
    """Per-sample terms; ``holds[i]`` checks ``eps_query <= (1 + slack)(eps_train + d_train + d_query)``."""

    train_res: int
    query_res: int
    fine_res: int
    eps_train: np.ndarray
    eps_query: np.ndarray
    drift_train: np.ndarray
    drift_query: np.ndarray
    slack: float = DECOMPOSITION_SLACK

    @property
    def bound(self) -> np.ndarray:
        return (1.0 + self.slack) * (self.eps_train + self.drift_train + self.drift_query)

    @property
    def holds(self) -> np.ndarray:
        return self.eps_query <= self.bound

    @property
    def fraction(self) -> float:
        return float(np.mean(self.holds))

    def flagged(self, required: float = 0.95) -> bool:
        """True when the inequality fails on more than ``1 - required`` of the samples."""
        return self.fraction < required


def error_decomposition(predictor, dataset: TaskDataset, train_res: int, query_res: int,
                        fine_res: int | None = None, slack: float = DECOMPOSITION_SLACK,
                        batch: int = 16) -> DecompositionReport:
    """Observable error terms on the test split.

    ``eps(f, X)`` is the relative error at the training resolution; the drift
    proxies compare the outputs at ``X`` and ``X~`` with the output on the
    finest grid, on the coarser grid's points and relative to the target
    norm there.
    """
    if query_res == train_res:
        raise InvalidArgument("query resolution must differ from the training resolution")
    fine = max(train_res, query_res) if fine_res is None else int(fine_res)
    if fine < max(train_res, query_res):
        raise InvalidArgument("the fine grid must be at least as fine as both compared grids")
    outs, terms = {}, {}
    for res in sorted({train_res, query_res, fine}):
        disc, f, u = dataset.at_resolution(res)
        outs[res] = (disc, predict(predictor, f, disc, batch), u)
    fdisc, fout, _ = outs[fine]
    for res in (train_res, query_res):
        disc, out, u = outs[res]
        stride = fine // res
        if fine % res:
            raise InvalidArgument(f"resolution {res} does not divide the fine resolution {fine}")
        grid = fdisc.to_grid(fout)[(slice(None),) + (slice(None, None, stride),) * disc.dim]
        fine_on_coarse = disc.from_grid(grid)
        den = weighted_norm(u, disc.weights)
        terms[res] = (per_sample_relative_l2(out, u, disc.weights),
                      weighted_norm(out - fine_on_coarse, disc.weights) / den)
    (e_t, d_t), (e_q, d_q) = terms[train_res], terms[query_res]
    return DecompositionReport(train_res, query_res, fine, e_t, e_q, d_t, d_q, slack)


__all__ = [
    "SWEEP_HEADER", "DRIFT_HEADER", "SweepRow", "EvalReport", "PoissonOracle", "resolution_sweep",
    "sweep_csv", "write_sweep_csv", "DriftReport", "discretization_convergence_test", "layer_operator",
    "skewed_chain", "KnnContrast", "knn_gno_contrast", "gaussian_kernel", "CollapseReport",
    "box_average_sine", "receptive_field_collapse_demo", "DecompositionReport", "error_decomposition",
    "per_sample_relative_l2", "weighted_norm", "predict",
]
