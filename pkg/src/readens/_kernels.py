"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Each kernel exists as ``<name>_numpy`` and, when numba is available,
``<name>_numba``. The public ``<name>`` is whichever backend
:mod:`readens._accel` selected. Both paths agree to floating-point
round-off; the test-suite checks that directly.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import BACKEND, njit

# ---------------------------------------------------------------- confusion


def confusion_matrix_numpy(gold, pred, k):
    """Count matrix ``C[g, p]`` for 0-based integer labels in ``[0, k)``."""
    flat = np.asarray(gold, dtype=np.int64) * k + np.asarray(pred, dtype=np.int64)
    return np.bincount(flat, minlength=k * k).reshape(k, k).astype(np.int64)


def _confusion_matrix_loop(gold, pred, k):
    out = np.zeros((k, k), dtype=np.int64)
    for i in range(gold.shape[0]):
        out[gold[i], pred[i]] += 1
    return out


def quadratic_disagreement_numpy(conf):
    """Return ``(sum w*O, sum w*E)`` with O, E normalised to total mass 1."""
    conf = np.asarray(conf, dtype=np.float64)
    k = conf.shape[0]
    n = conf.sum()
    idx = np.arange(k, dtype=np.float64)
    w = (idx[:, None] - idx[None, :]) ** 2 / float((k - 1) ** 2)
    observed = conf / n
    expected = np.outer(conf.sum(axis=1), conf.sum(axis=0)) / (n * n)
    return float((w * observed).sum()), float((w * expected).sum())


def _quadratic_disagreement_loop(conf):
    k = conf.shape[0]
    n = 0.0
    rows = np.zeros(k)
    cols = np.zeros(k)
    for i in range(k):
        for j in range(k):
            c = float(conf[i, j])
            n += c
            rows[i] += c
            cols[j] += c
    denom = float((k - 1) * (k - 1))
    num = 0.0
    den = 0.0
    for i in range(k):
        for j in range(k):
            w = (i - j) * (i - j) / denom
            num += w * conf[i, j] / n
            den += w * rows[i] * cols[j] / (n * n)
    return num, den


# -------------------------------------------------------------- CORAL loss


def coral_loss_grad_numpy(x, labels, w, b, item_weights):
    """Mean weighted CORAL loss and its gradient w.r.t. ``w`` and ``b``.

    ``labels`` are 1-based levels; threshold ``k`` (0-based) has target
    ``labels > k + 1``. Returns ``(loss, grad_w, grad_b)``.
    """
    n = x.shape[0]
    a = x @ w
    z = a[:, None] + b[None, :]
    t = (labels[:, None] > np.arange(1, b.shape[0] + 1)[None, :]).astype(np.float64)
    softplus = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    per_item = (softplus - t * z).sum(axis=1)
    loss = float((item_weights * per_item).sum() / n)
    g = (_sigmoid(z) - t) * (item_weights[:, None] / n)
    return loss, x.T @ g.sum(axis=1), g.sum(axis=0)


def _coral_loss_grad_loop(x, labels, w, b, item_weights):
    n, d = x.shape
    m = b.shape[0]
    grad_w = np.zeros(d)
    grad_b = np.zeros(m)
    loss = 0.0
    for i in range(n):
        a = 0.0
        for j in range(d):
            a += x[i, j] * w[j]
        c = item_weights[i] / n
        ga = 0.0
        for k in range(m):
            z = a + b[k]
            t = 1.0 if labels[i] > k + 1 else 0.0
            sp = max(z, 0.0) + math.log1p(math.exp(-abs(z)))
            loss += c * (sp - t * z)
            if z >= 0.0:
                p = 1.0 / (1.0 + math.exp(-z))
            else:
                e = math.exp(z)
                p = e / (1.0 + e)
            g = c * (p - t)
            ga += g
            grad_b[k] += g
        for j in range(d):
            grad_w[j] += ga * x[i, j]
    return loss, grad_w, grad_b


# ------------------------------------------------------- softmax CE loss


def ce_loss_grad_numpy(x, labels, weights, bias, item_weights):
    """Mean weighted softmax cross-entropy; ``labels`` are 0-based class ids."""
    n = x.shape[0]
    logits = x @ weights + bias
    top = logits.max(axis=1, keepdims=True)
    shifted = logits - top
    lse = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    loss = float((item_weights * (lse - shifted[rows, labels])).sum() / n)
    g = np.exp(shifted - lse[:, None])
    g[rows, labels] -= 1.0
    g *= (item_weights / n)[:, None]
    return loss, x.T @ g, g.sum(axis=0)


def _ce_loss_grad_loop(x, labels, weights, bias, item_weights):
    n, d = x.shape
    k = bias.shape[0]
    grad_w = np.zeros((d, k))
    grad_b = np.zeros(k)
    logits = np.empty(k)
    loss = 0.0
    for i in range(n):
        top = -np.inf
        for c in range(k):
            s = bias[c]
            for j in range(d):
                s += x[i, j] * weights[j, c]
            logits[c] = s
            if s > top:
                top = s
        total = 0.0
        for c in range(k):
            total += math.exp(logits[c] - top)
        lse = math.log(total)
        scale = item_weights[i] / n
        loss += scale * (lse - (logits[labels[i]] - top))
        for c in range(k):
            g = math.exp(logits[c] - top - lse)
            if c == labels[i]:
                g -= 1.0
            g *= scale
            grad_b[c] += g
            for j in range(d):
                grad_w[j, c] += g * x[i, j]
    return loss, grad_w, grad_b


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


sigmoid = _sigmoid

confusion_matrix_numba = njit(_confusion_matrix_loop)
quadratic_disagreement_numba = njit(_quadratic_disagreement_loop)
coral_loss_grad_numba = njit(_coral_loss_grad_loop)
ce_loss_grad_numba = njit(_ce_loss_grad_loop)

if BACKEND == "numba":

    def confusion_matrix(gold, pred, k):
        return confusion_matrix_numba(
            np.ascontiguousarray(gold, dtype=np.int64),
            np.ascontiguousarray(pred, dtype=np.int64),
            k,
        )

    def quadratic_disagreement(conf):
        num, den = quadratic_disagreement_numba(np.ascontiguousarray(conf, dtype=np.int64))
        return float(num), float(den)

    def coral_loss_grad(x, labels, w, b, item_weights):
        loss, gw, gb = coral_loss_grad_numba(x, labels, w, b, item_weights)
        return float(loss), gw, gb

    def ce_loss_grad(x, labels, weights, bias, item_weights):
        loss, gw, gb = ce_loss_grad_numba(x, labels, weights, bias, item_weights)
        return float(loss), gw, gb

else:
    confusion_matrix = confusion_matrix_numpy
    quadratic_disagreement = quadratic_disagreement_numpy
    coral_loss_grad = coral_loss_grad_numpy
    ce_loss_grad = ce_loss_grad_numpy
