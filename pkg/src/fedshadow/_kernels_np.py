"""Pure-numpy fallback kernels.

Vectorized equivalents of the numba kernels in `_kernels_jit`. Results
agree with the JIT backend to floating-point roundoff (summation order
differs), and each backend is individually replay-deterministic.
"""

import numpy as np


def sgd_train(w1, b1, w2, b2, x, labels, order, batch_size, lr):
    n_epochs, n = order.shape
    for epoch in range(n_epochs):
        batch_index = 0
        for start in range(0, n, batch_size):
            idx = order[epoch, start:start + batch_size]
            xb = x[idx]
            yb = labels[idx]
            bs = xb.shape[0]

            hidden = np.maximum(xb @ w1.T + b1, 0.0)
            logits = hidden @ w2.T + b2
            shifted = logits - logits.max(axis=1, keepdims=True)
            expz = np.exp(shifted)
            probs = expz / expz.sum(axis=1, keepdims=True)

            grad = probs
            grad[np.arange(bs), yb] -= 1.0
            grad /= bs

            dhidden = grad @ w2
            dhidden[hidden <= 0.0] = 0.0

            w2 -= lr * (grad.T @ hidden)
            b2 -= lr * grad.sum(axis=0)
            w1 -= lr * (dhidden.T @ xb)
            b1 -= lr * dhidden.sum(axis=0)

            if not (np.isfinite(w1).all() and np.isfinite(b1).all()
                    and np.isfinite(w2).all() and np.isfinite(b2).all()):
                return epoch, batch_index
            batch_index += 1
    return -1, -1


def forward_logits(w1, b1, w2, b2, x):
    hidden = np.maximum(x @ w1.T + b1, 0.0)
    return hidden @ w2.T + b2


def jacobi_eigh(a, tol, max_sweeps):
    n = a.shape[0]
    m = a.copy()
    v = np.eye(n)

    norm = np.sqrt((m * m).sum())
    threshold = tol * norm if norm > 0.0 else 0.0
    skip_eps = threshold / (n * n + 1.0)

    sweeps = 0
    for sweep in range(max_sweeps):
        off = np.sqrt(2.0 * (np.triu(m, 1) ** 2).sum())
        if off <= threshold:
            break
        sweeps = sweep + 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p, q]
                if abs(apq) <= skip_eps:
                    continue
                tau = (m[q, q] - m[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                cth = 1.0 / np.sqrt(1.0 + t * t)
                sth = t * cth
                mp = m[p, :].copy()
                mq = m[q, :].copy()
                m[p, :] = cth * mp - sth * mq
                m[q, :] = sth * mp + cth * mq
                mp = m[:, p].copy()
                mq = m[:, q].copy()
                m[:, p] = cth * mp - sth * mq
                m[:, q] = sth * mp + cth * mq
                m[p, q] = 0.0
                m[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = cth * vp - sth * vq
                v[:, q] = sth * vp + cth * vq

    return np.diag(m).copy(), v, sweeps


def silhouette_two(points, flags):
    n = points.shape[0]
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))

    total = 0.0
    for i in range(n):
        same = flags == flags[i]
        same[i] = False
        other = flags != flags[i]
        if not same.any():
            continue
        a = dist[i, same].mean()
        b = dist[i, other].mean()
        bot = max(a, b)
        if bot > 0.0:
            total += (b - a) / bot
    return total / n


def mean_pairwise(points):
    n = points.shape[0]
    iu = np.triu_indices(n, 1)
    diff = points[iu[0]] - points[iu[1]]
    return float(np.sqrt((diff * diff).sum(axis=1)).mean())
