"""Finite-difference gradient verification."""

from __future__ import annotations

import numpy as np

from pointcast.diffcore.tensor import Tensor, no_grad
from pointcast.errors import GradientError


def finite_diff_check(loss_fn, named_params, h: float = 1e-6, tol: float = 1e-4,
                      sample: int | None = None,
                      rng: np.random.Generator | None = None) -> dict:
    """Compare analytic gradients of loss_fn() against central differences.

    loss_fn must rebuild the forward graph on every call and return a scalar
    Tensor. named_params is a list of (name, Tensor) pairs whose gradients
    are checked. When sample is given, at most that many elements per
    parameter are probed (seeded choice), which keeps large checks cheap.

    Relative error for each element uses max(|analytic|, |numeric|, 1e-8)
    as the denominator so near-zero gradients do not blow up the ratio.
    The report never raises on a failed comparison; parameters whose max
    relative error exceeds tol are listed under "failures".
    """
    named_params = list(named_params)
    if not named_params:
        return {"max_rel_err": 0.0, "per_param": {}, "failures": [], "n_checked": 0}
    for _, p in named_params:
        p.grad = None
    loss = loss_fn()
    if not isinstance(loss, Tensor) or loss.data.size != 1:
        raise GradientError("loss_fn must return a scalar tensor")
    loss.backward()
    analytic = {}
    for name, p in named_params:
        if p.grad is None:
            raise GradientError(f"parameter {name} received no gradient")
        analytic[name] = p.grad.copy()

    per_param = {}
    worst = 0.0
    checked = 0
    for name, p in named_params:
        flat = p.data.reshape(-1)
        n = flat.size
        if sample is not None and sample < n:
            if rng is None:
                rng = np.random.default_rng(0)
            positions = np.sort(rng.choice(n, size=sample, replace=False))
        else:
            positions = np.arange(n)
        ana_flat = analytic[name].reshape(-1)
        max_err = 0.0
        for j in positions:
            orig = flat[j]
            with no_grad():
                flat[j] = orig + h
                f_plus = loss_fn().item()
                flat[j] = orig - h
                f_minus = loss_fn().item()
            flat[j] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            ana = float(ana_flat[j])
            denom = max(abs(numeric), abs(ana), 1e-8)
            err = abs(numeric - ana) / denom
            if err > max_err:
                max_err = err
            checked += 1
        per_param[name] = max_err
        if max_err > worst:
            worst = max_err
    failures = [name for name, err in per_param.items() if err > tol]
    return {
        "max_rel_err": worst,
        "per_param": per_param,
        "failures": failures,
        "n_checked": checked,
    }
