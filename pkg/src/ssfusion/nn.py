"""Fusion network, its optional alignment and UNet streams, and the optimizer."""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, is_dataclass
from typing import Optional

import numpy as np

from . import tensor as T
from .tensor import Node, ShapeError


class ConvLayer:
    """3x3 convolution with He-uniform kernel and zero bias."""

    def __init__(self, cin: int, cout: int, rng: np.random.Generator, name: str,
                 stride: int = 1):
        bound = np.sqrt(6.0 / (cin * 9))
        self.kernel = T.parameter(rng.uniform(-bound, bound, size=(cout, cin, 3, 3)).astype(T.DTYPE),
                                  name=f"{name}.kernel")
        self.bias = T.parameter(np.zeros(cout, dtype=T.DTYPE), name=f"{name}.bias")
        self.stride = stride

    def __call__(self, x: Node) -> Node:
        return T.conv2d(x, self.kernel, self.bias, stride=self.stride, padding=1)

    def parameters(self) -> list[Node]:
        return [self.kernel, self.bias]


class SpatialTransformer:
    """Affine alignment block.

    A small localization net (two stride-2 convs, global pooling, a linear
    head) predicts ``theta``; the head starts at zero weights with the
    identity as bias, so the untrained block passes its input through exactly.
    """

    def __init__(self, channels: int, rng: np.random.Generator):
        self.loc1 = ConvLayer(channels, 8, rng, "stn.loc1", stride=2)
        self.loc2 = ConvLayer(8, 8, rng, "stn.loc2", stride=2)
        self.head_w = T.parameter(np.zeros((6, 8), dtype=T.DTYPE), name="stn.head.weight")
        self.head_b = T.parameter(np.array([1, 0, 0, 0, 1, 0], dtype=T.DTYPE), name="stn.head.bias")

    def theta(self, x: Node) -> Node:
        f = T.relu(self.loc2(T.relu(self.loc1(x))))
        t = T.linear(T.global_avg_pool(f), self.head_w, self.head_b)
        return T.reshape(t, (x.shape[0], 2, 3))

    def __call__(self, x: Node) -> Node:
        # only the NIR channel (0) is warped; the input stack is constant data
        theta = self.theta(x)
        nir = T.constant(x.value[:, :1])
        rest = T.constant(x.value[:, 1:])
        return T.concat([T.affine_grid_sample(nir, theta), rest], axis=1)

    def parameters(self) -> list[Node]:
        return self.loc1.parameters() + self.loc2.parameters() + [self.head_w, self.head_b]


class MiniUNet:
    """Two-level encoder/decoder with skip concatenations, 2 -> 1 channels."""

    def __init__(self, cin: int, rng: np.random.Generator, width: int = 16):
        w1, w2, w3 = width, 2 * width, 4 * width
        self.enc1a = ConvLayer(cin, w1, rng, "unet.enc1a")
        self.enc1b = ConvLayer(w1, w1, rng, "unet.enc1b")
        self.down1 = ConvLayer(w1, w2, rng, "unet.down1", stride=2)
        self.enc2 = ConvLayer(w2, w2, rng, "unet.enc2")
        self.down2 = ConvLayer(w2, w3, rng, "unet.down2", stride=2)
        self.bott = ConvLayer(w3, w3, rng, "unet.bottleneck")
        self.dec2 = ConvLayer(w3 + w2, w2, rng, "unet.dec2")
        self.dec1 = ConvLayer(w2 + w1, w1, rng, "unet.dec1")
        self.head = ConvLayer(w1, 1, rng, "unet.head")

    def __call__(self, x: Node) -> Node:
        e1 = T.relu(self.enc1b(T.relu(self.enc1a(x))))
        e2 = T.relu(self.enc2(T.relu(self.down1(e1))))
        b = T.relu(self.bott(T.relu(self.down2(e2))))
        d2 = T.relu(self.dec2(T.concat([T.upsample_nearest(b, e2.shape[2:]), e2])))
        d1 = T.relu(self.dec1(T.concat([T.upsample_nearest(d2, e1.shape[2:]), e1])))
        return self.head(d1)

    def parameters(self) -> list[Node]:
        layers = [self.enc1a, self.enc1b, self.down1, self.enc2, self.down2, self.bott,
                  self.dec2, self.dec1, self.head]
        return [p for layer in layers for p in layer.parameters()]


class FusionNet:
    """Four 3x3 convolutions with two additive skips, sigmoid output.

    ``stn`` warps the NIR channel before the convolutions; ``unet`` runs in
    parallel on the same 2-channel input and its 1-channel map is added
    (broadcast over the 8 channels) to the second skip sum before ``conv4``.
    """

    def __init__(self, stn: bool = False, unet: bool = False, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.seed = seed
        self.conv1 = ConvLayer(2, 8, rng, "conv1")
        self.conv2 = ConvLayer(8, 8, rng, "conv2")
        self.conv3 = ConvLayer(8, 8, rng, "conv3")
        self.conv4 = ConvLayer(8, 1, rng, "conv4")
        self.stn: Optional[SpatialTransformer] = SpatialTransformer(2, rng) if stn else None
        self.unet: Optional[MiniUNet] = MiniUNet(2, rng) if unet else None

    def stack_inputs(self, nir: np.ndarray, gray: np.ndarray) -> Node:
        nir, gray = np.asarray(nir), np.asarray(gray)
        if nir.shape != gray.shape or nir.ndim != 4 or nir.shape[1] != 1:
            raise ShapeError(f"nir {nir.shape} and gray {gray.shape} must both be [n,1,h,w]")
        return T.constant(np.concatenate([nir, gray], axis=1), dtype=self.conv1.kernel.dtype)

    def aligned(self, x: Node) -> Node:
        return self.stn(x) if self.stn is not None else x

    def __call__(self, nir: np.ndarray, gray: np.ndarray) -> Node:
        x = self.aligned(self.stack_inputs(nir, gray))
        c1 = T.relu(self.conv1(x))
        c2 = T.relu(self.conv2(c1))
        add1 = T.add(c1, c2)
        c3 = T.relu(self.conv3(add1))
        add2 = T.add(add1, c3)
        if self.unet is not None:
            add2 = T.add(add2, T.expand_channels(self.unet(x), add2.shape[1]))
        return T.sigmoid(self.conv4(add2))

    def layers(self) -> list[tuple[str, Node]]:
        params = [p for conv in (self.conv1, self.conv2, self.conv3, self.conv4)
                  for p in conv.parameters()]
        if self.stn is not None:
            params += self.stn.parameters()
        if self.unet is not None:
            params += self.unet.parameters()
        return [(p.name, p) for p in params]

    def parameters(self) -> list[Node]:
        return [p for _, p in self.layers()]

    def num_parameters(self) -> int:
        return int(sum(p.value.size for p in self.parameters()))

    def state(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self.layers()}

    def load_state(self, state: dict[str, np.ndarray]):
        for name, p in self.layers():
            if state[name].shape != p.shape:
                raise ShapeError(f"{name}: checkpoint shape {state[name].shape} vs {p.shape}")
            p.value = state[name].astype(p.dtype, copy=True)


class Adam:
    """Adam with bias correction; ``step`` consumes and then clears gradients."""

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]
        self.t = 0

    def step(self):
        for i, p in enumerate(self.params):
            if not np.all(np.isfinite(p.grad)):
                raise FloatingPointError(f"non-finite gradient in parameter {p.name or i}")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (self.lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)
            p.value = (p.value - update).astype(p.dtype, copy=False)
            p.zero_grad()


# ---------------------------------------------------------------------------
# checkpoints: b"SSFN" | u32 header length | JSON header | little-endian float32 data

MAGIC = b"SSFN"


def config_hash(config) -> str:
    payload = asdict(config) if is_dataclass(config) else dict(config or {})
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def save_checkpoint(net: FusionNet, path, config=None):
    layers = net.layers()
    header = {
        "seed": net.seed,
        "stn": net.stn is not None,
        "unet": net.unet is not None,
        "config_hash": config_hash(config),
        "layers": [{"name": name, "shape": list(p.shape)} for name, p in layers],
    }
    hbytes = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(hbytes)))
        fh.write(hbytes)
        for _, p in layers:
            fh.write(np.ascontiguousarray(p.value, dtype="<f4").tobytes())


def load_checkpoint(path) -> tuple[FusionNet, dict]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ValueError(f"{path}: not a fusion checkpoint")
    (hlen,) = struct.unpack("<I", blob[4:8])
    header = json.loads(blob[8:8 + hlen].decode("utf-8"))
    net = FusionNet(stn=header["stn"], unet=header["unet"], seed=header["seed"])
    offset = 8 + hlen
    state = {}
    for entry in header["layers"]:
        count = int(np.prod(entry["shape"]))
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        state[entry["name"]] = arr.reshape(entry["shape"]).astype(T.DTYPE)
        offset += 4 * count
    if offset != len(blob):
        raise ValueError(f"{path}: trailing or missing parameter data")
    net.load_state(state)
    return net, header
