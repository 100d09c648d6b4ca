"""Numpy implementations of the hot kernels.

This is the fallback backend used when the compiled extension is not
available. Both backends implement the same four entry points with
identical semantics:

    conv2d(inp, weights, biases, pads)   stride-1 cross-correlation
    maxpool2(inp)                        non-overlapping 2x2 window max
    hlac_counts(bits, offsets, sizes)    mask-product counting
    sift_histograms(mag, ori, patch, step)  raw 4x4x8 patch histograms

All floating-point accumulation happens in float64; results are stored
as float32 (counts as int64).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv2d(inp, weights, biases, pads):
    """Stride-1 2-D cross-correlation with per-kernel scalar bias.

    inp      float32 (H, W, Cin)
    weights  float32 (K, kh, kw, Cin)
    biases   float32 (K,)
    pads     (top, bottom, left, right) zero padding
    returns  float32 (H_out, W_out, K)
    """
    k, kh, kw, cin = weights.shape
    pt, pb, pl, pr = pads
    padded = np.pad(inp, ((pt, pb), (pl, pr), (0, 0)))
    out_h = padded.shape[0] - kh + 1
    out_w = padded.shape[1] - kw + 1
    # (H_out, W_out, Cin, kh, kw) -> (H_out*W_out, kh*kw*Cin) im2col matrix
    windows = sliding_window_view(padded, (kh, kw), axis=(0, 1))
    cols = windows.transpose(0, 1, 3, 4, 2).reshape(out_h * out_w, kh * kw * cin)
    wmat = weights.reshape(k, kh * kw * cin)
    out = cols.astype(np.float64) @ wmat.astype(np.float64).T
    out += biases.astype(np.float64)
    return out.reshape(out_h, out_w, k).astype(np.float32)


def maxpool2(inp):
    """Per-channel max over non-overlapping 2x2 windows; dims must be even."""
    h, w, c = inp.shape
    return inp.reshape(h // 2, 2, w // 2, 2, c).max(axis=(1, 3))


def hlac_counts(bits, offsets, sizes):
    """Sum over interior pixels of the product of mask-offset bits.

    bits     uint8 (H, W) of {0, 1}
    offsets  int64 (n_masks, 3, 2) as (dy, dx) rows; rows beyond the mask
             size are ignored
    sizes    int64 (n_masks,) number of valid offset rows per mask
    returns  int64 (n_masks,)
    """
    h, w = bits.shape
    ih, iw = h - 2, w - 2
    out = np.empty(len(sizes), dtype=np.int64)
    for m in range(len(sizes)):
        acc = np.ones((ih, iw), dtype=np.uint8)
        for j in range(sizes[m]):
            dy, dx = offsets[m, j]
            acc &= bits[1 + dy : 1 + dy + ih, 1 + dx : 1 + dx + iw]
        out[m] = int(acc.sum(dtype=np.int64))
    return out


def sift_histograms(mag, ori, patch, step):
    """Raw (unnormalized) 4x4-cell, 8-orientation-bin patch histograms.

    Patches tile the map at `step` pixels starting from (0, 0); per pixel
    the gradient magnitude is distributed trilinearly over the two nearest
    cells in each spatial dimension and the two nearest orientation bins.
    Flattening order is (cell_y, cell_x, orientation_bin).

    mag, ori  float32 (H, W); ori in [0, 2*pi)
    returns   float32 (n_patches, 128), patches in row-major grid order
    """
    h, w = mag.shape
    ny = (h - patch) // step + 1
    nx = (w - patch) // step + 1
    n = ny * nx
    cell = patch / 4.0

    mwin = sliding_window_view(mag, (patch, patch))[::step, ::step]
    owin = sliding_window_view(ori, (patch, patch))[::step, ::step]
    mwin = mwin.reshape(n, patch, patch).astype(np.float64)
    owin = owin.reshape(n, patch, patch).astype(np.float64)

    # spatial soft-assignment is identical for every patch
    f = (np.arange(patch) + 0.5) / cell - 0.5
    c0 = np.floor(f).astype(np.int64)
    w1 = f - c0
    w0 = 1.0 - w1

    fo = owin * (8.0 / (2.0 * np.pi))
    ob0 = np.floor(fo).astype(np.int64)
    wo1 = fo - ob0
    wo0 = 1.0 - wo1
    ob0 %= 8
    ob1 = (ob0 + 1) % 8

    hist = np.zeros((n, 128), dtype=np.float64)
    patch_idx = np.broadcast_to(
        np.arange(n)[:, None, None], (n, patch, patch)
    )
    for sy, (cy, wy) in enumerate(((c0, w0), (c0 + 1, w1))):
        ymask = (cy >= 0) & (cy < 4)
        for sx, (cx, wx) in enumerate(((c0, w0), (c0 + 1, w1))):
            xmask = (cx >= 0) & (cx < 4)
            valid = ymask[:, None] & xmask[None, :]
            if not valid.any():
                continue
            spatial = wy[:, None] * wx[None, :]
            cell_bin = (np.clip(cy, 0, 3)[:, None] * 4 + np.clip(cx, 0, 3)[None, :]) * 8
            for ob, wo in ((ob0, wo0), (ob1, wo1)):
                contrib = mwin * spatial[None, :, :] * wo
                contrib = np.where(valid[None, :, :], contrib, 0.0)
                np.add.at(
                    hist.reshape(-1),
                    (patch_idx * 128 + cell_bin[None, :, :] + ob).ravel(),
                    contrib.ravel(),
                )
    return hist.astype(np.float32)
