"""Small time-conditioned residual convnet in plain numpy (float64).

Forward and backward passes are written out by hand; gradient correctness is
pinned by finite-difference tests.  Architecture: a 3x3 embedding conv, D
full-resolution residual blocks (each: 3x3 conv + per-channel time bias,
relu, dropout, 3x3 conv, skip add, relu), and a 1x1 head emitting 2 logits
per input entry.  The head is zero-initialized so the untrained model
predicts the uniform distribution.
"""

from __future__ import annotations

import numpy as np

TIME_EMB_DIM = 64


def time_embedding(k, dim: int = TIME_EMB_DIM) -> np.ndarray:
    """Sinusoidal step embedding; frequencies geometric from 1 down to 1e-4."""
    k = np.asarray(k, dtype=np.float64)
    half = dim // 2
    freqs = 10000.0 ** (-np.arange(half) / (half - 1))
    ang = k[..., None] * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)


def _im2col3(x: np.ndarray) -> np.ndarray:
    """(B, C, H, W) -> (B, C*9, H*W) patches of the 3x3 neighborhood, pad 1."""
    b, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = np.empty((b, c, 9, h, w), dtype=x.dtype)
    idx = 0
    for di in range(3):
        for dj in range(3):
            cols[:, :, idx] = xp[:, :, di : di + h, dj : dj + w]
            idx += 1
    return cols.reshape(b, c * 9, h * w)


def _col2im3(cols: np.ndarray, c: int, h: int, w: int) -> np.ndarray:
    """Adjoint of _im2col3 (scatter-add back onto the padded image)."""
    b = cols.shape[0]
    cols = cols.reshape(b, c, 9, h, w)
    xp = np.zeros((b, c, h + 2, w + 2), dtype=cols.dtype)
    idx = 0
    for di in range(3):
        for dj in range(3):
            xp[:, :, di : di + h, dj : dj + w] += cols[:, :, idx]
            idx += 1
    return xp[:, :, 1 : h + 1, 1 : w + 1]


def conv3x3(x, weight, bias):
    """Same-padding 3x3 convolution as one GEMM; returns (y, cols) cached.

    cols has shape (C*9, B*H*W) so forward and backward are single matmuls.
    """
    b, c, h, w = x.shape
    cols = _im2col3(x).transpose(1, 0, 2).reshape(c * 9, b * h * w)
    wmat = weight.reshape(weight.shape[0], -1)
    y = wmat @ cols + bias[:, None]
    y = y.reshape(weight.shape[0], b, h, w).transpose(1, 0, 2, 3)
    return y, cols


def conv3x3_backward(dy, cols, weight, in_shape):
    b, c, h, w = in_shape
    o = dy.shape[1]
    dyf = dy.transpose(1, 0, 2, 3).reshape(o, b * h * w)
    wmat = weight.reshape(o, -1)
    dwmat = dyf @ cols.T
    db = dyf.sum(axis=1)
    dcols = wmat.T @ dyf
    dcols = dcols.reshape(c * 9, b, h * w).transpose(1, 0, 2)
    dx = _col2im3(dcols, c, h, w)
    return dx, dwmat.reshape(weight.shape), db


def init_params(
    channels: int, depth: int, width: int, seed: int, emb_dim: int = TIME_EMB_DIM
) -> dict[str, np.ndarray]:
    """Fan-in-scaled random weights; zero output head."""
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))

    def he(shape, fan_in):
        return gen.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)

    params = {
        "in.w": he((width, channels, 3, 3), channels * 9),
        "in.b": np.zeros(width),
    }
    for d in range(depth):
        params[f"block{d}.tw"] = he((width, emb_dim), emb_dim)
        params[f"block{d}.tb"] = np.zeros(width)
        params[f"block{d}.c1w"] = he((width, width, 3, 3), width * 9)
        params[f"block{d}.c1b"] = np.zeros(width)
        params[f"block{d}.c2w"] = he((width, width, 3, 3), width * 9)
        params[f"block{d}.c2b"] = np.zeros(width)
    params["head.w"] = np.zeros((2 * channels, width))
    params["head.b"] = np.zeros(2 * channels)
    return params


def forward(
    params: dict,
    x: np.ndarray,
    k,
    depth: int,
    dropout: float = 0.0,
    dropout_rng: np.random.Generator | None = None,
):
    """Run the network; returns (logits, cache).

    x: (B, C, M, M) float64; k: scalar or (B,) step indices.  logits shape is
    (B, C, M, M, 2).  Dropout is active only when dropout > 0 and a generator
    is supplied (training); inference is deterministic.
    """
    b, c, h, w = x.shape
    k = np.broadcast_to(np.asarray(k, dtype=np.float64), (b,))
    emb = time_embedding(k)
    cache = {"x": x, "emb": emb, "blocks": []}

    y, cols = conv3x3(x, params["in.w"], params["in.b"])
    cache["in.cols"] = cols
    cache["in.pre"] = y
    hcur = np.maximum(y, 0.0)

    for d in range(depth):
        blk = {"h_in": hcur}
        tbias = emb @ params[f"block{d}.tw"].T + params[f"block{d}.tb"]  # (B, W)
        u1, cols1 = conv3x3(hcur, params[f"block{d}.c1w"], params[f"block{d}.c1b"])
        u1 = u1 + tbias[:, :, None, None]
        a1 = np.maximum(u1, 0.0)
        if dropout > 0.0 and dropout_rng is not None:
            mask = (dropout_rng.random(a1.shape) >= dropout) / (1.0 - dropout)
            a1d = a1 * mask
        else:
            mask = None
            a1d = a1
        u2, cols2 = conv3x3(a1d, params[f"block{d}.c2w"], params[f"block{d}.c2b"])
        pre = blk["h_in"] + u2
        hcur = np.maximum(pre, 0.0)
        blk.update(u1=u1, cols1=cols1, mask=mask, a1d=a1d, cols2=cols2, pre=pre)
        cache["blocks"].append(blk)

    cache["h_out"] = hcur
    hflat = hcur.transpose(1, 0, 2, 3).reshape(params["head.w"].shape[1], b * h * w)
    logits = params["head.w"] @ hflat + params["head.b"][:, None]
    logits = logits.reshape(2 * c, b, h, w).transpose(1, 0, 2, 3)
    return logits.reshape(b, c, 2, h, w).transpose(0, 1, 3, 4, 2), cache


def backward(params: dict, cache: dict, dlogits: np.ndarray, depth: int) -> dict:
    """Gradients of a scalar loss for every parameter, given d loss / d logits."""
    b, c, h, w, _ = dlogits.shape
    grads = {}
    width = params["head.w"].shape[1]
    dl = dlogits.transpose(0, 1, 4, 2, 3).reshape(b, 2 * c, h, w)
    dlf = dl.transpose(1, 0, 2, 3).reshape(2 * c, b * h * w)
    hflat = cache["h_out"].transpose(1, 0, 2, 3).reshape(width, b * h * w)
    grads["head.w"] = dlf @ hflat.T
    grads["head.b"] = dlf.sum(axis=1)
    dh = (params["head.w"].T @ dlf).reshape(width, b, h, w).transpose(1, 0, 2, 3)

    for d in reversed(range(depth)):
        blk = cache["blocks"][d]
        dpre = dh * (blk["pre"] > 0.0)
        dh_in = dpre.copy()  # skip connection
        da1d, grads[f"block{d}.c2w"], grads[f"block{d}.c2b"] = conv3x3_backward(
            dpre, blk["cols2"], params[f"block{d}.c2w"], blk["a1d"].shape
        )
        da1 = da1d * blk["mask"] if blk["mask"] is not None else da1d
        du1 = da1 * (blk["u1"] > 0.0)
        dtbias = du1.sum(axis=(2, 3))  # (B, W)
        grads[f"block{d}.tw"] = dtbias.T @ cache["emb"]
        grads[f"block{d}.tb"] = dtbias.sum(axis=0)
        dh_prev, grads[f"block{d}.c1w"], grads[f"block{d}.c1b"] = conv3x3_backward(
            du1, blk["cols1"], params[f"block{d}.c1w"], blk["h_in"].shape
        )
        dh = dh_in + dh_prev

    dy = dh * (cache["in.pre"] > 0.0)
    _, grads["in.w"], grads["in.b"] = conv3x3_backward(
        dy, cache["in.cols"], params["in.w"], cache["x"].shape
    )
    return grads


class Adam:
    """Standard Adam update with optional global-norm gradient clipping."""

    def __init__(self, params: dict, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict, clip: float | None = None) -> None:
        if clip is not None and clip > 0:
            gnorm = np.sqrt(sum(float((g**2).sum()) for g in grads.values()))
            if gnorm > clip:
                scale = clip / gnorm
                grads = {k: g * scale for k, g in grads.items()}
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for key in sorted(params):
            g = grads[key]
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * g * g
            params[key] -= (
                self.lr * (self.m[key] / c1) / (np.sqrt(self.v[key] / c2) + self.eps)
            )
