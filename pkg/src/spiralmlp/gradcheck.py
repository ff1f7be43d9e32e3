"""Finite-difference verification of analytic gradients.

The check projects the operation's output onto a fixed random direction R,
forming the scalar ``L = sum(R * f(x))``. Analytic gradients come from one
backward pass with ``grad_out = R``; numeric gradients from central differences
with step ``1e-5 * max(1, |v|)`` per element. The reported relative error is
``|a - n| / max(1, |a|, |n|)`` (relative above unit scale, absolute below it).
Run in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["GradCheckReport", "grad_check", "grad_check_fn", "numeric_grad"]

DEFAULT_STEP = 1e-5


@dataclass
class GradCheckReport:
    tolerance: float
    max_rel_err: float = 0.0
    worst: str = ""
    errors: dict = field(default_factory=dict)  # tensor name -> max rel err
    failure: str = ""                           # non-finite location, if any

    @property
    def passed(self) -> bool:
        return not self.failure and self.max_rel_err <= self.tolerance

    def record(self, name: str, analytic: np.ndarray, numeric: np.ndarray) -> None:
        if not np.all(np.isfinite(analytic)):
            self.failure = f"non-finite analytic gradient in {name}"
            return
        if not np.all(np.isfinite(numeric)):
            self.failure = f"non-finite numeric gradient in {name}"
            return
        denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
        rel = np.abs(analytic - numeric) / denom
        err = float(rel.max()) if rel.size else 0.0
        self.errors[name] = err
        if err > self.max_rel_err:
            self.max_rel_err = err
            self.worst = f"{name}[{np.unravel_index(int(rel.argmax()), rel.shape)}]"

    def __str__(self):
        status = "PASS" if self.passed else f"FAIL ({self.failure or self.worst})"
        return f"grad check: max rel err {self.max_rel_err:.3e} vs tol {self.tolerance:.0e} -> {status}"


def _indices(shape, size, rng, max_entries):
    if max_entries is None or size <= max_entries:
        return range(size)
    return sorted(rng.choice(size, size=max_entries, replace=False).tolist())


def numeric_grad(loss_fn, arr: np.ndarray, rng=None, step: float = DEFAULT_STEP,
                 max_entries: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference gradient of ``loss_fn()`` w.r.t. elements of ``arr``.

    ``arr`` is mutated in place during probing and restored afterwards. Returns
    ``(grad, mask)`` where mask flags the probed entries (all, unless
    ``max_entries`` subsamples large tensors).
    """
    grad = np.zeros_like(arr, dtype=np.float64)
    mask = np.zeros(arr.shape, dtype=bool)
    flat = arr.reshape(-1)
    for idx in _indices(arr.shape, flat.size, rng, max_entries):
        orig = flat[idx]
        h = step * max(1.0, abs(float(orig)))
        flat[idx] = orig + h
        f_plus = loss_fn()
        flat[idx] = orig - h
        f_minus = loss_fn()
        flat[idx] = orig
        grad.reshape(-1)[idx] = (f_plus - f_minus) / (2 * h)
        mask.reshape(-1)[idx] = True
    return grad, mask


def grad_check(module, inputs, tolerance: float, rng: np.random.Generator | None = None,
               max_entries: int | None = None, step: float = DEFAULT_STEP) -> GradCheckReport:
    """Check a Module's analytic input and parameter gradients.

    ``inputs`` is one array or a tuple of arrays fed to ``module.forward``;
    ``module.backward(R)`` must return the input gradient(s) in the same
    arrangement.
    """
    rng = rng or np.random.default_rng(0)
    single = not isinstance(inputs, (tuple, list))
    xs = [np.asarray(x, dtype=np.float64) for x in ((inputs,) if single else inputs)]

    y = module.forward(*xs)
    proj = rng.standard_normal(y.shape)

    def loss():
        return float(np.sum(proj * module.forward(*xs)))

    module.zero_grad()
    module.forward(*xs)
    grads_in = module.backward(proj.copy())
    if single:
        grads_in = (grads_in,)

    report = GradCheckReport(tolerance=tolerance)
    for i, (x, g) in enumerate(zip(xs, grads_in)):
        num, mask = numeric_grad(loss, x, rng=rng, step=step, max_entries=max_entries)
        report.record(f"input{i}", np.where(mask, g, 0.0), num)
        if report.failure:
            return report
    for name, p in module.params():
        num, mask = numeric_grad(loss, p.value, rng=rng, step=step, max_entries=max_entries)
        report.record(name, np.where(mask, p.grad, 0.0), num)
        if report.failure:
            return report
    return report


def grad_check_fn(f, vjp, x: np.ndarray, tolerance: float,
                  rng: np.random.Generator | None = None,
                  step: float = DEFAULT_STEP) -> GradCheckReport:
    """Check a pure function's VJP: ``f(x) -> y``, ``vjp(x, grad_y) -> grad_x``."""
    rng = rng or np.random.default_rng(0)
    x = np.asarray(x, dtype=np.float64)
    proj = rng.standard_normal(f(x).shape)
    analytic = vjp(x, proj)
    num, _ = numeric_grad(lambda: float(np.sum(proj * f(x))), x, rng=rng, step=step)
    report = GradCheckReport(tolerance=tolerance)
    report.record("input", analytic, num)
    return report
