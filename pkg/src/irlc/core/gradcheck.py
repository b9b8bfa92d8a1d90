"""Central finite-difference gradient checking."""
from __future__ import annotations

import numpy as np

from .tensor import backward


def numeric_grad(f, p, idx, h=1e-5):
    old = p.data[idx]
    p.data[idx] = old + h
    up = float(f().data)
    p.data[idx] = old - h
    down = float(f().data)
    p.data[idx] = old
    return (up - down) / (2 * h)


def gradcheck(f, params, h=1e-5, max_entries=None, rng=None):
    """Compare analytic and central-difference gradients of scalar ``f()``.

    Returns ``{name: relative_error}`` where the error for each parameter is
    ``|g_analytic - g_numeric| / max(|g_analytic|, |g_numeric|)`` in the 2-norm
    over the checked entries (0 when both vanish).  ``max_entries`` caps the
    number of randomly chosen entries checked per parameter.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    params = list(params)
    for p in params:
        p.zero_grad()
    backward(f())
    report = {}
    for p in params:
        flat = np.arange(p.data.size)
        if max_entries is not None and flat.size > max_entries:
            flat = rng.choice(flat, size=max_entries, replace=False)
        analytic, numeric = [], []
        for k in flat:
            idx = np.unravel_index(k, p.data.shape)
            analytic.append(p.grad[idx])
            numeric.append(numeric_grad(f, p, idx, h))
        a, n = np.array(analytic), np.array(numeric)
        scale = max(np.linalg.norm(a), np.linalg.norm(n))
        report[p.name] = 0.0 if scale < 1e-12 else float(np.linalg.norm(a - n) / scale)
        p.zero_grad()
    return report
