"""NumPy implementations of the hot kernels.

These are the reference semantics; the Cython extension in ``_ckernels.pyx``
mirrors every function here. All inputs are float64 and C-contiguous, all
spatial layouts are row-major (h, w, c).
"""

import numpy as np

BACKEND = "numpy"


def conv2d_forward(x, w, b, stride, pad):
    """Valid convolution of a zero-padded (H, W, Cin) input.

    w has shape (k, k, Cin, Cout); returns (Ho, Wo, Cout) pre-activations.
    """
    k = w.shape[0]
    h, wd, cin = x.shape
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    y = np.tile(b, (ho, wo, 1))
    for a in range(k):
        for c in range(k):
            xs = xp[a : a + (ho - 1) * stride + 1 : stride,
                    c : c + (wo - 1) * stride + 1 : stride, :]
            y += xs @ w[a, c]
    return y


def conv2d_input_grad(gy, w, stride, pad, in_h, in_w):
    """Gradient of conv2d_forward w.r.t. its input, shape (in_h, in_w, Cin)."""
    k = w.shape[0]
    ho, wo, _ = gy.shape
    cin = w.shape[2]
    gxp = np.zeros((in_h + 2 * pad, in_w + 2 * pad, cin))
    for a in range(k):
        for c in range(k):
            gxp[a : a + (ho - 1) * stride + 1 : stride,
                c : c + (wo - 1) * stride + 1 : stride, :] += gy @ w[a, c].T
    if pad == 0:
        return gxp
    return gxp[pad:-pad, pad:-pad, :]


def conv2d_param_grad(x, gy, stride, pad, k):
    """Gradients of conv2d_forward w.r.t. weights and bias."""
    ho, wo, cout = gy.shape
    cin = x.shape[2]
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    gw = np.zeros((k, k, cin, cout))
    for a in range(k):
        for c in range(k):
            xs = xp[a : a + (ho - 1) * stride + 1 : stride,
                    c : c + (wo - 1) * stride + 1 : stride, :]
            gw[a, c] = np.tensordot(xs, gy, axes=([0, 1], [0, 1]))
    gb = gy.sum(axis=(0, 1))
    return gw, gb


def correlate_maps(fmap, kernels):
    """Per-kernel 1x1 correlation maps: (H, W, D) x (p, D) -> (p, H, W)."""
    return np.einsum("hwd,pd->phw", fmap, kernels)


def box3_sum(maps):
    """3x3 zero-padded box sum over the trailing two axes of (B, H, W)."""
    b, h, w = maps.shape
    mp = np.pad(maps, ((0, 0), (1, 1), (1, 1)))
    out = np.zeros_like(maps)
    for a in range(3):
        for c in range(3):
            out += mp[:, a : a + h, c : c + w]
    return out
