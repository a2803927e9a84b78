"""Autodiff gradients against central finite differences."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import backward, no_grad


@dataclass
class GradCheckReport:
    deviations: dict = field(default_factory=dict)
    tolerance: float = 1e-5

    @property
    def passed(self) -> bool:
        return all(d < self.tolerance for d in self.deviations.values())

    @property
    def max_deviation(self) -> float:
        return max(self.deviations.values(), default=0.0)

    def __str__(self):
        lines = [f"{k}: {v:.3e}" for k, v in self.deviations.items()]
        status = "pass" if self.passed else "FAIL"
        return f"grad_check {status} (tol {self.tolerance:g})" + ("\n  " + "\n  ".join(lines) if lines else "")


def _deviation(auto: np.ndarray, num: np.ndarray) -> float:
    scale = max(np.max(np.abs(num), initial=0.0), np.max(np.abs(auto), initial=0.0))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(auto - num)) / scale)


def grad_check(fn, params, step: float = 1e-5, tolerance: float = 1e-5) -> GradCheckReport:
    """Compare ``backward(fn())`` with central differences for each parameter.

    Deviation per parameter is ``max|auto - num| / max(max|num|, max|auto|)``.
    Complex parameters are checked on their real and imaginary parts
    separately (reported as ``name`` and ``name.imag``).
    """
    params = list(params)
    report = GradCheckReport(tolerance=tolerance)
    if not params:
        return report
    for p in params:
        p.grad = None
    backward(fn())
    for idx, p in enumerate(params):
        name = p.name or f"param{idx}"
        auto = np.zeros(p.shape, dtype=p.dtype) if p.grad is None else p.grad
        parts = [("", 1.0, auto.real)]
        if p.is_complex:
            parts.append((".imag", 1j, auto.imag))
        for suffix, unit, auto_part in parts:
            num = np.zeros(p.shape)
            p.data = np.ascontiguousarray(p.data)
            flat = p.data.reshape(-1)
            with no_grad():
                for i in range(flat.size):
                    orig = flat[i]
                    flat[i] = orig + unit * step
                    up = float(fn().data)
                    flat[i] = orig - unit * step
                    down = float(fn().data)
                    flat[i] = orig
                    num.reshape(-1)[i] = (up - down) / (2 * step)
            report.deviations[name + suffix] = _deviation(np.asarray(auto_part), num)
    for p in params:
        p.grad = None
    return report
