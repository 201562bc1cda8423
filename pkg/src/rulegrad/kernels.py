"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is picked once at import time. Set ``RULEGRAD_NUMBA=0`` to force
the numpy implementations (also used automatically when numba is missing).
Both implementations are always importable as ``numpy_impl`` / ``numba_impl``
so they can be compared directly.
"""

from __future__ import annotations

import os
import types

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------

def _np_lse3(a, b):
    """log(e^a + e^b + e^(a+b)) and its partials w.r.t. a and b."""
    c = a + b
    m = np.maximum(np.maximum(a, b), c)
    ea = np.exp(a - m)
    eb = np.exp(b - m)
    ec = np.exp(c - m)
    s = ea + eb + ec
    out = m + np.log(s)
    return out, (ea + ec) / s, (eb + ec) / s


def _np_log_softmax_rows(x):
    m = x.max(axis=-1, keepdims=True)
    z = x - m
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _np_softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _np_adam_update(p, g, m, v, lr, b1, b2, eps, wd, step):
    g = g + wd * p
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * g * g
    mhat = m / (1.0 - b1 ** step)
    vhat = v / (1.0 - b2 ** step)
    p -= lr * mhat / (np.sqrt(vhat) + eps)


numpy_impl = types.SimpleNamespace(
    lse3=_np_lse3,
    log_softmax_rows=_np_log_softmax_rows,
    softplus=_np_softplus,
    adam_update=_np_adam_update,
)


# ---------------------------------------------------------------------------
# numba implementations (flat loops over contiguous buffers)
# ---------------------------------------------------------------------------

def _build_numba_impl():
    njit = numba.njit(cache=False, nogil=True)

    @njit
    def _lse3_flat(a, b, out, da, db):
        for i in range(a.size):
            x = a[i]
            y = b[i]
            c = x + y
            m = max(x, y, c)
            ea = np.exp(x - m)
            eb = np.exp(y - m)
            ec = np.exp(c - m)
            s = ea + eb + ec
            out[i] = m + np.log(s)
            da[i] = (ea + ec) / s
            db[i] = (eb + ec) / s

    @njit
    def _log_softmax_2d(x, out):
        n, k = x.shape
        for i in range(n):
            m = x[i, 0]
            for j in range(1, k):
                if x[i, j] > m:
                    m = x[i, j]
            s = 0.0
            for j in range(k):
                s += np.exp(x[i, j] - m)
            lse = m + np.log(s)
            for j in range(k):
                out[i, j] = x[i, j] - lse

    @njit
    def _softplus_flat(x, out):
        for i in range(x.size):
            v = x[i]
            out[i] = max(v, 0.0) + np.log1p(np.exp(-abs(v)))

    @njit
    def _adam_flat(p, g, m, v, lr, b1, b2, eps, wd, step):
        c1 = 1.0 - b1 ** step
        c2 = 1.0 - b2 ** step
        for i in range(p.size):
            gi = g[i] + wd * p[i]
            m[i] = b1 * m[i] + (1.0 - b1) * gi
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi
            p[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)

    def lse3(a, b):
        shape = np.shape(a)
        a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1)
        b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1)
        out = np.empty_like(a)
        da = np.empty_like(a)
        db = np.empty_like(a)
        _lse3_flat(a, b, out, da, db)
        return out.reshape(shape), da.reshape(shape), db.reshape(shape)

    def log_softmax_rows(x):
        x = np.asarray(x, dtype=np.float64)
        x2 = np.ascontiguousarray(x.reshape(-1, x.shape[-1]))
        out = np.empty_like(x2)
        _log_softmax_2d(x2, out)
        return out.reshape(x.shape)

    def softplus(x):
        shape = np.shape(x)
        x = np.ascontiguousarray(x, dtype=np.float64).reshape(-1)
        out = np.empty_like(x)
        _softplus_flat(x, out)
        return out.reshape(shape)

    def adam_update(p, g, m, v, lr, b1, b2, eps, wd, step):
        # p, m, v are updated in place through flat views
        if not (p.flags.c_contiguous and m.flags.c_contiguous and v.flags.c_contiguous):
            raise ValueError("adam_update needs C-contiguous parameter and moment arrays")
        _adam_flat(p.reshape(-1), np.ascontiguousarray(g).reshape(-1), m.reshape(-1),
                   v.reshape(-1), lr, b1, b2, eps, wd, float(step))

    return types.SimpleNamespace(
        lse3=lse3,
        log_softmax_rows=log_softmax_rows,
        softplus=softplus,
        adam_update=adam_update,
    )


numba_impl = _build_numba_impl() if numba is not None else None

USE_NUMBA = numba_impl is not None and os.environ.get("RULEGRAD_NUMBA", "1") != "0"
BACKEND = "numba" if USE_NUMBA else "numpy"

_active = numba_impl if USE_NUMBA else numpy_impl

lse3 = _active.lse3
log_softmax_rows = _active.log_softmax_rows
softplus = _active.softplus
adam_update = _active.adam_update
