"""Independent reference implementations used as test oracles.

Everything here is written directly from the mathematical definition —
nested loops, exhaustive scans, closed forms — and deliberately shares
no code with the package.
"""

import math

import numpy as np


def conv2d_reference(inp, weights, biases, pads):
    """Six nested loops over output position, kernel window and channel."""
    h, w, cin = inp.shape
    k, kh, kw, _ = weights.shape
    pt, pb, pl, pr = pads
    out_h = h + pt + pb - kh + 1
    out_w = w + pl + pr - kw + 1
    out = np.zeros((out_h, out_w, k), dtype=np.float64)
    for oy in range(out_h):
        for ox in range(out_w):
            for kk in range(k):
                acc = float(biases[kk])
                for ky in range(kh):
                    for kx in range(kw):
                        iy = oy + ky - pt
                        ix = ox + kx - pl
                        if 0 <= iy < h and 0 <= ix < w:
                            for c in range(cin):
                                acc += float(weights[kk, ky, kx, c]) * float(inp[iy, ix, c])
                out[oy, ox, kk] = acc
    return out


def maxpool2_reference(inp):
    h, w, c = inp.shape
    out = np.empty((h // 2, w // 2, c), dtype=inp.dtype)
    for y in range(h // 2):
        for x in range(w // 2):
            for ch in range(c):
                out[y, x, ch] = max(inp[2 * y, 2 * x, ch],
                                    inp[2 * y, 2 * x + 1, ch],
                                    inp[2 * y + 1, 2 * x, ch],
                                    inp[2 * y + 1, 2 * x + 1, ch])
    return out


def relu_reference(inp):
    flat = [max(0.0, float(v)) for v in np.asarray(inp).ravel()]
    return np.array(flat, dtype=np.asarray(inp).dtype).reshape(np.asarray(inp).shape)


def gradient_reference(plane):
    """Per-pixel central/one-sided differences, recomputed scalar-wise."""
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    mag = np.empty((h, w))
    ori = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            if 0 < x < w - 1:
                dx = (plane[y, x + 1] - plane[y, x - 1]) / 2.0
            elif x == 0:
                dx = plane[y, 1] - plane[y, 0]
            else:
                dx = plane[y, w - 1] - plane[y, w - 2]
            if 0 < y < h - 1:
                dy = (plane[y + 1, x] - plane[y - 1, x]) / 2.0
            elif y == 0:
                dy = plane[1, x] - plane[0, x]
            else:
                dy = plane[h - 1, x] - plane[h - 2, x]
            mag[y, x] = math.hypot(dx, dy)
            angle = math.atan2(dy, dx)
            if angle < 0:
                angle += 2.0 * math.pi
            if angle >= 2.0 * math.pi:
                angle = 0.0
            ori[y, x] = angle
    return mag, ori


def bilinear_reference(image, out_h, out_w):
    """Direct interpolation formula evaluated per output pixel."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    in_h, in_w, channels = arr.shape
    out = np.empty((out_h, out_w, channels))
    for oy in range(out_h):
        sy = min(max((oy + 0.5) * in_h / out_h - 0.5, 0.0), in_h - 1.0)
        y0 = int(math.floor(sy))
        y1 = min(y0 + 1, in_h - 1)
        fy = sy - y0
        for ox in range(out_w):
            sx = min(max((ox + 0.5) * in_w / out_w - 0.5, 0.0), in_w - 1.0)
            x0 = int(math.floor(sx))
            x1 = min(x0 + 1, in_w - 1)
            fx = sx - x0
            for c in range(channels):
                top = arr[y0, x0, c] * (1 - fx) + arr[y0, x1, c] * fx
                bottom = arr[y1, x0, c] * (1 - fx) + arr[y1, x1, c] * fx
                out[oy, ox, c] = top * (1 - fy) + bottom * fy
    return out


def otsu_reference(values, bins=256):
    """Exhaustive scan over every candidate split of the histogram.

    Returns (best_bin, best_sigma, sigmas) where class 0 is bins
    [0..best_bin] and ties go to the lowest bin.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    lo, hi = float(values.min()), float(values.max())
    assert hi > lo
    idx = np.minimum(((values - lo) / (hi - lo) * bins).astype(np.int64), bins - 1)
    hist = [0] * bins
    for i in idx:
        hist[int(i)] += 1
    n = len(values)
    sigmas = []
    for t in range(bins):
        n0 = sum(hist[:t + 1])
        n1 = n - n0
        if n0 == 0 or n1 == 0:
            sigmas.append(0.0)
            continue
        mu0 = sum(i * hist[i] for i in range(t + 1)) / n0
        mu1 = sum(i * hist[i] for i in range(t + 1, bins)) / n1
        sigmas.append((n0 / n) * (n1 / n) * (mu0 - mu1) ** 2)
    best = max(range(bins), key=lambda t: (sigmas[t], -t))
    return best, sigmas[best], sigmas


def enumerate_hlac_masks_reference():
    """Brute-force mask enumeration with an orbit-based dedupe.

    Generates every offset set containing the origin with up to two extra
    neighbors, then groups sets by the full orbit of in-window translates
    and keeps one representative per orbit.
    """
    from itertools import combinations

    window = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1)]
    neighbors = [o for o in window if o != (0, 0)]
    all_masks = []
    for size in (0, 1, 2):
        for combo in combinations(neighbors, size):
            all_masks.append(frozenset({(0, 0), *combo}))
    orbits = {}
    for mask in all_masks:
        orbit = set()
        for ty in (-2, -1, 0, 1, 2):
            for tx in (-2, -1, 0, 1, 2):
                moved = frozenset((dy + ty, dx + tx) for dy, dx in mask)
                if (0, 0) in moved and all(
                        abs(dy) <= 1 and abs(dx) <= 1 for dy, dx in moved):
                    orbit.add(moved)
        key = frozenset(orbit)
        representative = min(tuple(sorted(m)) for m in orbit)
        orbits[key] = representative
    return sorted(orbits.values(), key=lambda m: (len(m), m))


def hlac_reference(bits, masks):
    """Triple loop straight from the product-sum definition."""
    bits = np.asarray(bits)
    h, w = bits.shape
    out = []
    for mask in masks:
        count = 0
        for y in range(1, h - 1):
            for x in range(1, w - 1):
                product = 1
                for dy, dx in mask:
                    product *= int(bits[y + dy, x + dx])
                count += product
        out.append(count)
    return np.array(out, dtype=np.int64)


def nearest_centroid_reference(descriptors, centroids):
    """Exhaustive nearest-neighbor scan with direct squared distances."""
    labels = []
    for x in np.asarray(descriptors, dtype=np.float64):
        best, best_d = 0, None
        for j, c in enumerate(np.asarray(centroids, dtype=np.float64)):
            d = float(((x - c) ** 2).sum())
            if best_d is None or d < best_d:
                best, best_d = j, d
        labels.append(best)
    return np.array(labels, dtype=np.int64)


def distortion_reference(descriptors, centroids):
    x = np.asarray(descriptors, dtype=np.float64)
    labels = nearest_centroid_reference(x, centroids)
    return float(sum(((x[i] - np.asarray(centroids, dtype=np.float64)[labels[i]]) ** 2).sum()
                     for i in range(len(x))))


def svm_dual_reference(x, y, C):
    """Generic box-constrained QP solve of the dual via scipy L-BFGS-B.

    Maximizes sum(a) - 0.5 * ||sum_i a_i y_i x~_i||^2 over [0, C]^n for
    the bias-augmented problem; returns the optimal objective value.
    """
    from scipy.optimize import minimize

    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x_aug = np.hstack([x, np.ones((len(x), 1))])
    q = (y[:, None] * x_aug) @ (y[:, None] * x_aug).T

    def negative_dual(a):
        return 0.5 * a @ q @ a - a.sum()

    def gradient(a):
        return q @ a - np.ones_like(a)

    best = None
    # multi-start to guard against any flat-region stalls
    starts = [np.zeros(len(y)), np.full(len(y), C / 2), np.full(len(y), C)]
    for start in starts:
        result = minimize(negative_dual, start, jac=gradient, method="L-BFGS-B",
                          bounds=[(0.0, C)] * len(y),
                          options={"maxiter": 2000, "ftol": 1e-14, "gtol": 1e-12})
        if best is None or result.fun < best:
            best = result.fun
    return -best


def svm_primal_reference(w, b, x, y, C):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    hinge = sum(max(0.0, 1.0 - float(y[i]) * (float(x[i] @ w) + b))
                for i in range(len(y)))
    return 0.5 * (float(np.dot(w, w)) + b * b) + C * hinge
