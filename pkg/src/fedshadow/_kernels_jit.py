"""Numba-compiled hot kernels.

Loop-style implementations of the inner numeric loops: minibatch SGD on
the two-layer softmax classifier, the cyclic Jacobi eigensolver behind
PCA, and the pairwise-distance scores. `_kernels_np` holds the
vectorized pure-numpy equivalents; `_kernels` picks one backend.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def sgd_train(w1, b1, w2, b2, x, labels, order, batch_size, lr):
    """Run len(order) epochs of minibatch SGD in place.

    order holds one precomputed index permutation per epoch. Returns
    (epoch, batch) of the first non-finite parameter, or (-1, -1).
    """
    n_epochs = order.shape[0]
    n = order.shape[1]
    h = w1.shape[0]
    d = w1.shape[1]
    c = w2.shape[0]

    for epoch in range(n_epochs):
        batch_index = 0
        for start in range(0, n, batch_size):
            stop = min(start + batch_size, n)
            bs = stop - start

            xb = np.empty((bs, d))
            yb = np.empty(bs, dtype=np.int64)
            for i in range(bs):
                src = order[epoch, start + i]
                for j in range(d):
                    xb[i, j] = x[src, j]
                yb[i] = labels[src]

            # forward: hidden relu, output logits
            hidden = np.empty((bs, h))
            for i in range(bs):
                for j in range(h):
                    acc = b1[j]
                    for k in range(d):
                        acc += w1[j, k] * xb[i, k]
                    hidden[i, j] = acc if acc > 0.0 else 0.0

            probs = np.empty((bs, c))
            for i in range(bs):
                zmax = -1e300
                for j in range(c):
                    acc = b2[j]
                    for k in range(h):
                        acc += w2[j, k] * hidden[i, k]
                    probs[i, j] = acc
                    if acc > zmax:
                        zmax = acc
                total = 0.0
                for j in range(c):
                    e = np.exp(probs[i, j] - zmax)
                    probs[i, j] = e
                    total += e
                for j in range(c):
                    probs[i, j] /= total

            # backward: mean cross-entropy gradient
            inv = 1.0 / bs
            for i in range(bs):
                probs[i, yb[i]] -= 1.0
                for j in range(c):
                    probs[i, j] *= inv

            dhidden = np.zeros((bs, h))
            for i in range(bs):
                for k in range(h):
                    if hidden[i, k] > 0.0:
                        acc = 0.0
                        for j in range(c):
                            acc += probs[i, j] * w2[j, k]
                        dhidden[i, k] = acc

            for j in range(c):
                acc_b = 0.0
                for i in range(bs):
                    acc_b += probs[i, j]
                b2[j] -= lr * acc_b
                for k in range(h):
                    acc = 0.0
                    for i in range(bs):
                        acc += probs[i, j] * hidden[i, k]
                    w2[j, k] -= lr * acc

            for j in range(h):
                acc_b = 0.0
                for i in range(bs):
                    acc_b += dhidden[i, j]
                b1[j] -= lr * acc_b
                for k in range(d):
                    acc = 0.0
                    for i in range(bs):
                        acc += dhidden[i, j] * xb[i, k]
                    w1[j, k] -= lr * acc

            ok = True
            for j in range(h):
                if not np.isfinite(b1[j]):
                    ok = False
                for k in range(d):
                    if not np.isfinite(w1[j, k]):
                        ok = False
            for j in range(c):
                if not np.isfinite(b2[j]):
                    ok = False
                for k in range(h):
                    if not np.isfinite(w2[j, k]):
                        ok = False
            if not ok:
                return epoch, batch_index
            batch_index += 1

    return -1, -1


@njit(cache=True, nogil=True)
def forward_logits(w1, b1, w2, b2, x):
    """Logits of the two-layer relu classifier for a batch."""
    n = x.shape[0]
    d = x.shape[1]
    h = w1.shape[0]
    c = w2.shape[0]
    out = np.empty((n, c))
    hidden = np.empty(h)
    for i in range(n):
        for j in range(h):
            acc = b1[j]
            for k in range(d):
                acc += w1[j, k] * x[i, k]
            hidden[j] = acc if acc > 0.0 else 0.0
        for j in range(c):
            acc = b2[j]
            for k in range(h):
                acc += w2[j, k] * hidden[k]
            out[i, j] = acc
    return out


@njit(cache=True, nogil=True)
def jacobi_eigh(a, tol, max_sweeps):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns (eigenvalues, eigenvectors as columns, sweeps used).
    Convergence: off-diagonal Frobenius norm <= tol * ||A||_F.
    """
    n = a.shape[0]
    m = a.copy()
    v = np.eye(n)

    norm = 0.0
    for i in range(n):
        for j in range(n):
            norm += m[i, j] * m[i, j]
    norm = np.sqrt(norm)
    threshold = tol * norm if norm > 0.0 else 0.0

    sweeps = 0
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += 2.0 * m[i, j] * m[i, j]
        off = np.sqrt(off)
        if off <= threshold:
            break
        sweeps = sweep + 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p, q]
                if np.abs(apq) <= threshold / (n * n + 1.0):
                    continue
                tau = (m[q, q] - m[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                cth = 1.0 / np.sqrt(1.0 + t * t)
                sth = t * cth
                # rows p, q
                for k in range(n):
                    mp = m[p, k]
                    mq = m[q, k]
                    m[p, k] = cth * mp - sth * mq
                    m[q, k] = sth * mp + cth * mq
                # columns p, q
                for k in range(n):
                    mp = m[k, p]
                    mq = m[k, q]
                    m[k, p] = cth * mp - sth * mq
                    m[k, q] = sth * mp + cth * mq
                m[p, q] = 0.0
                m[q, p] = 0.0
                for k in range(n):
                    vp = v[k, p]
                    vq = v[k, q]
                    v[k, p] = cth * vp - sth * vq
                    v[k, q] = sth * vp + cth * vq

    vals = np.empty(n)
    for i in range(n):
        vals[i] = m[i, i]
    return vals, v, sweeps


@njit(cache=True, nogil=True)
def silhouette_two(points, flags):
    """Mean silhouette of the bipartition given by flags.

    Both groups must be non-empty. Singleton-group points contribute 0,
    as do points where both mean distances are 0.
    """
    n = points.shape[0]
    d = points.shape[1]
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(d):
                diff = points[i, k] - points[j, k]
                acc += diff * diff
            dd = np.sqrt(acc)
            dist[i, j] = dd
            dist[j, i] = dd

    total = 0.0
    for i in range(n):
        same_sum = 0.0
        same_cnt = 0
        other_sum = 0.0
        other_cnt = 0
        for j in range(n):
            if j == i:
                continue
            if flags[j] == flags[i]:
                same_sum += dist[i, j]
                same_cnt += 1
            else:
                other_sum += dist[i, j]
                other_cnt += 1
        if same_cnt == 0:
            continue  # singleton contributes 0
        a = same_sum / same_cnt
        b = other_sum / other_cnt
        top = b - a
        bot = a if a > b else b
        if bot > 0.0:
            total += top / bot
    return total / n


@njit(cache=True, nogil=True)
def mean_pairwise(points):
    """Mean Euclidean distance over all point pairs (needs >= 2 points)."""
    n = points.shape[0]
    d = points.shape[1]
    total = 0.0
    count = 0
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(d):
                diff = points[i, k] - points[j, k]
                acc += diff * diff
            total += np.sqrt(acc)
            count += 1
    return total / count
