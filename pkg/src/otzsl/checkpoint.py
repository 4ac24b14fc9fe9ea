"""Binary checkpoints for the generator/predictor pair and optimizer state.

Layout (all little-endian): 8-byte magic "OTZSLCP1", uint32 version, four
uint32 dims (attr, feature, generator hidden, predictor hidden), then the
row-major float64 weight blocks W1, b1, W2, b2 for the generator and then the
predictor, the class-softmax sharpness as one float64, and finally an optional
Adam section (uint8 flag; uint64 step; learning rate, beta1, beta2, epsilon;
first-moment blocks then second-moment blocks in the same 8-block order).
Round-trips are bit-exact.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DataFormatError
from .generator import GeneratorParams, PredictorParams
from .mlp import AdamState, MlpParams

MAGIC = b"OTZSLCP1"
VERSION = 1


def param_blocks(g: GeneratorParams, f: PredictorParams) -> list[np.ndarray]:
    """The canonical 8-block ordering used by checkpoints and the optimizer."""
    return g.net.blocks() + f.net.blocks()


def _block_shapes(attr_dim, feature_dim, hidden_g, hidden_f):
    return [
        (hidden_g, 2 * attr_dim), (hidden_g,), (feature_dim, hidden_g), (feature_dim,),
        (hidden_f, feature_dim), (hidden_f,), (attr_dim, hidden_f), (attr_dim,),
    ]


def save_checkpoint(path: str, g: GeneratorParams, f: PredictorParams,
                    adam: AdamState | None = None) -> None:
    parts = [MAGIC, struct.pack("<5I", VERSION, g.attr_dim, g.feature_dim,
                                g.net.hidden_dim, f.net.hidden_dim)]
    for block in param_blocks(g, f):
        parts.append(np.ascontiguousarray(block, dtype="<f8").tobytes())
    parts.append(struct.pack("<d", f.nca_scale))
    if adam is None:
        parts.append(struct.pack("<B", 0))
    else:
        parts.append(struct.pack("<B", 1))
        parts.append(struct.pack("<Q4d", adam.step, adam.learning_rate,
                                 adam.beta1, adam.beta2, adam.epsilon))
        for block in adam.m + adam.v:
            parts.append(np.ascontiguousarray(block, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


class _Reader:
    def __init__(self, buf: bytes, path: str):
        self.buf = buf
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.buf):
            raise DataFormatError(f"{self.path}: truncated checkpoint")
        out = self.buf[self.off:self.off + n]
        self.off += n
        return out

    def array(self, shape) -> np.ndarray:
        count = int(np.prod(shape))
        raw = self.take(8 * count)
        return np.frombuffer(raw, dtype="<f8", count=count).astype(np.float64).reshape(shape)


def load_checkpoint(path: str) -> tuple[GeneratorParams, PredictorParams, AdamState | None]:
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise DataFormatError(f"cannot read checkpoint: {exc}") from None
    r = _Reader(buf, path)
    if r.take(8) != MAGIC:
        raise DataFormatError(f"{path}: not a checkpoint file (bad magic)")
    version, attr_dim, feature_dim, hidden_g, hidden_f = struct.unpack("<5I", r.take(20))
    if version != VERSION:
        raise DataFormatError(f"{path}: unsupported checkpoint version {version}")

    shapes = _block_shapes(attr_dim, feature_dim, hidden_g, hidden_f)
    blocks = [r.array(s) for s in shapes]
    (nca_scale,) = struct.unpack("<d", r.take(8))
    g = GeneratorParams(net=MlpParams(*blocks[:4]))
    f = PredictorParams(net=MlpParams(*blocks[4:]), nca_scale=nca_scale)

    (flag,) = struct.unpack("<B", r.take(1))
    adam = None
    if flag == 1:
        step, lr, b1, b2, eps = struct.unpack("<Q4d", r.take(40))
        m = [r.array(s) for s in shapes]
        v = [r.array(s) for s in shapes]
        adam = AdamState(m=m, v=v, step=int(step), learning_rate=lr,
                         beta1=b1, beta2=b2, epsilon=eps)
    elif flag != 0:
        raise DataFormatError(f"{path}: bad optimizer flag {flag}")
    if r.off != len(buf):
        raise DataFormatError(f"{path}: {len(buf) - r.off} trailing bytes")
    return g, f, adam
