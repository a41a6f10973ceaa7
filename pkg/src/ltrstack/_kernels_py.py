"""Pure numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_kernels.pyx``.
Arrays are float64 and C-contiguous; batches are rows.
"""

import numpy as np

BACKEND = "python"


def mlp_forward(weights, biases, x, relu):
    """Run a dense net over a batch and return the activations of every layer.

    ``acts[0]`` is the input, ``acts[-1]`` the (linear) output.
    """
    acts = [x]
    h = x
    last = len(weights) - 1
    for i in range(len(weights)):
        z = h @ weights[i]
        z += biases[i]
        if i < last:
            if relu:
                np.maximum(z, 0.0, out=z)
            else:
                np.tanh(z, out=z)
        acts.append(z)
        h = z
    return acts


def mlp_backward(weights, acts, upstream, relu):
    """Reverse pass for :func:`mlp_forward`.

    Returns ``(weight_grads, bias_grads, input_grad)`` for the loss
    ``sum(upstream * acts[-1])``.
    """
    n_layers = len(weights)
    dws = [None] * n_layers
    dbs = [None] * n_layers
    d = upstream
    for i in range(n_layers - 1, -1, -1):
        if i < n_layers - 1:
            a = acts[i + 1]
            if relu:
                d = d * (a > 0.0)
            else:
                d = d * (1.0 - a * a)
        dws[i] = acts[i].T @ d
        dbs[i] = d.sum(axis=0)
        d = d @ weights[i].T
    return dws, dbs, d


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def superiority_matrix(s):
    """``A[i, j] = sigmoid(s[i] - s[j])`` with a zero diagonal."""
    a = _sigmoid(s[:, None] - s[None, :])
    np.fill_diagonal(a, 0.0)
    return a


def superiority(s, p):
    """Row i is ``sum_{j != i} sigmoid(s[i] - s[j]) * p[j]``."""
    return superiority_matrix(s) @ p


def superiority_backward(s, d_out):
    """Gradient of :func:`superiority` with respect to ``p``."""
    return superiority_matrix(s).T @ d_out


def masked_softmax(d):
    """Row-wise softmax that leaves out the diagonal (its weight is 0)."""
    n = d.shape[0]
    z = d.copy()
    np.fill_diagonal(z, -np.inf)
    if n < 2:
        return np.zeros_like(d)
    z -= z.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def masked_softmax_backward(w, d_w):
    """Gradient of :func:`masked_softmax` given its output ``w``."""
    d = w * (d_w - (d_w * w).sum(axis=1, keepdims=True))
    np.fill_diagonal(d, 0.0)
    return d


def gbt_scores(g):
    """``1 / (1 + sum_{j != i} exp(-g[i, j]))`` for every row of ``g``."""
    n = g.shape[0]
    off = ~np.eye(n, dtype=bool)
    neg = np.where(off, -g, -np.inf)
    out = np.empty(n)
    for i in range(n):
        row = neg[i, off[i]]
        if row.size and row.max() > 700.0:
            m = max(row.max(), 0.0)
            lse = m + np.log(np.exp(-m) + np.exp(row - m).sum())
            out[i] = np.exp(-lse)
        else:
            out[i] = 1.0 / (1.0 + np.exp(row).sum())
    return out


def avg_scores(g):
    n = g.shape[0]
    if n < 2:
        return np.zeros(n)
    off = ~np.eye(n, dtype=bool)
    return np.where(off, g, 0.0).sum(axis=1) / (n - 1)


def context_discount(u, x, lam, bandwidth):
    """``u[i] - lam * sum_j exp(-|x_i - x_j|^2 / bw) * max(0, u[j] - u[i])``."""
    diff = x[:, None, :] - x[None, :, :]
    sim = np.exp(-np.einsum("ijk,ijk->ij", diff, diff) / bandwidth)
    gap = np.maximum(u[None, :] - u[:, None], 0.0)
    return u - lam * (sim * gap).sum(axis=1)


def adam_update(params, grads, ms, vs, lr, b1, b2, c1, c2, eps):
    """In-place Adam step over lists of arrays."""
    for p, g, m, v in zip(params, grads, ms, vs):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
