"""Pure-numpy RK4 kernel; same contract as the compiled ``_kernels`` module."""

import numpy as np


def _hook(x, code, src, tgt, scale, grid, values):
    if code == 1:
        out = np.zeros_like(x)
        out[:, tgt] = scale * np.sin(x[:, src])
        return out
    if code == 2:
        out = np.zeros_like(x)
        out[:, tgt] = np.interp(x[:, src], grid, values)
        return out
    return None


def integrate(x0, w0, edge, first, second, A, BK, Ku,
              hook_code, hook_src, hook_tgt, hook_scale, grid, values, steps):
    """Classical RK4 over consecutive ``steps`` for the coupled state/weight field.

    Returns ``(X, W, fail)`` where ``X`` is ``(n+1, N, d)``, ``W`` is
    ``(n+1, P)`` and ``fail`` is the index of the first step that produced a
    non-finite value (``-1`` if none).  Rows after a failure are undefined.
    """
    x = np.array(x0, dtype=float)
    w = np.array(w0, dtype=float)
    N, d = x.shape
    P = w.shape[0]
    steps = np.asarray(steps, dtype=float)
    n = steps.shape[0]
    mask = np.asarray(edge, dtype=bool)
    # s = S^T (w * mask * D): +diff on the first endpoint, -diff on the second
    S = np.zeros((P, N))
    S[np.arange(P), first] = 1.0
    S[np.arange(P), second] = -1.0
    At, BKt, Kut = A.T, BK.T, Ku.T
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    emask = mask.astype(float)

    def field(x, w):
        D = x[second] - x[first]
        KD = D @ Kut
        dw = np.einsum("pj,pj->p", KD, KD)
        s = S.T @ ((w * emask)[:, None] * D)
        dx = x @ At + s @ BKt
        f = _hook(x, hook_code, hook_src, hook_tgt, hook_scale, grid, values)
        if f is not None:
            dx += f
        return dx, dw

    X = np.empty((n + 1, N, d))
    W = np.empty((n + 1, P))
    X[0], W[0] = x, w
    for j in range(n):
        h = steps[j]
        k1x, k1w = field(x, w)
        k2x, k2w = field(x + 0.5 * h * k1x, w + 0.5 * h * k1w)
        k3x, k3w = field(x + 0.5 * h * k2x, w + 0.5 * h * k2w)
        k4x, k4w = field(x + h * k3x, w + h * k3w)
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        w = w + (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        if not (np.isfinite(x).all() and np.isfinite(w).all()):
            return X, W, j
        X[j + 1], W[j + 1] = x, w
    return X, W, -1
