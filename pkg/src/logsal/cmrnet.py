"""Framework-free reference forward pass of the CMR-block saliency network.

Covers only inference: the cross-concatenated multi-scale residual block,
the dilated-inception module, the decoder, and the normalized-L1 loss.
Weights are seeded synthetically or loaded from an array-file bundle;
training is out of scope. Used mainly to generate deterministic synthetic
activation manifests for the reconstruction pipeline.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import grids
from .pipeline import to_luminance, LayerManifest, LayerEntry
from .validation import check_tensor3d

__all__ = [
    "ConvSpec",
    "CMRBlockWeights",
    "DIMConfig",
    "CMRNetWeights",
    "conv2d",
    "relu",
    "max_pool2",
    "cmr_forward",
    "dim_forward",
    "decoder_forward",
    "cmrnet_forward",
    "loss",
    "synth_weights",
    "save_weights",
    "load_weights",
]

DIM_RATES = (4, 8, 16)


@dataclass
class ConvSpec:
    """One convolution: (out, in, k, k) weights, per-channel bias,
    optional dilation. Zero padding keeps the spatial size."""

    weights: np.ndarray
    bias: np.ndarray
    dilation: int = 1

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 4 or w.shape[2] != w.shape[3]:
            raise ValueError(f"weights must be (out, in, k, k), got {w.shape}")
        if w.shape[2] not in (1, 3, 5):
            raise ValueError(f"kernel size must be 1, 3, or 5, got {w.shape[2]}")
        if self.dilation < 1:
            raise ValueError("dilation must be >= 1")
        b = np.asarray(self.bias, dtype=np.float64)
        if b.shape != (w.shape[0],):
            raise ValueError(f"bias shape {b.shape} does not match {w.shape[0]} outputs")
        self.weights = w
        self.bias = b

    @property
    def kernel(self):
        return self.weights.shape[2]

    @property
    def in_channels(self):
        return self.weights.shape[1]

    @property
    def out_channels(self):
        return self.weights.shape[0]


@dataclass
class CMRBlockWeights:
    """The five convolutions of one block: two first-stage paths on the
    input, two second-stage paths on their concatenation, and the 1x1
    merge back to the input channel count."""

    t1: ConvSpec  # 3x3 on the block input
    f1: ConvSpec  # 5x5 on the block input
    t2: ConvSpec  # 3x3 on [T1, F1]
    f2: ConvSpec  # 5x5 on [T1, F1]
    merge: ConvSpec  # 1x1 on [T2, F2], back to input channels


@dataclass
class DIMConfig:
    branches: tuple  # three dilated ConvSpecs, rates per DIM_RATES
    merge: ConvSpec  # 1x1 over the concatenated branches

    def __post_init__(self):
        rates = tuple(b.dilation for b in self.branches)
        if len(rates) != len(set(rates)) or any(r < 1 for r in rates):
            raise ValueError(f"dilation rates must be positive and distinct, got {rates}")


@dataclass
class CMRNetWeights:
    stem: ConvSpec
    lifts: tuple  # 1x1 channel lifts before blocks 2 and 3 (None for block 1)
    blocks: tuple  # three CMRBlockWeights
    dim: DIMConfig
    decoder: tuple  # ConvSpecs; last one outputs a single channel


def conv2d(x, spec):
    """Same-size 2-D cross-correlation with zero padding."""
    x = check_tensor3d(x, "input")
    if x.shape[0] != spec.in_channels:
        raise ValueError(
            f"input has {x.shape[0]} channels, spec expects {spec.in_channels}")
    k, d = spec.kernel, spec.dilation
    pad = (k - 1) * d // 2
    _, h, w = x.shape
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    out = np.broadcast_to(spec.bias[:, None, None], (spec.out_channels, h, w)).copy()
    for dy in range(k):
        for dx in range(k):
            patch = xp[:, dy * d:dy * d + h, dx * d:dx * d + w]
            out += np.tensordot(spec.weights[:, :, dy, dx], patch, axes=([1], [0]))
    return out


def relu(x):
    return np.maximum(x, 0.0)


def max_pool2(x):
    """2x2 max pooling, stride 2; trailing odd rows/cols are dropped."""
    c, h, w = x.shape
    x = x[:, : h // 2 * 2, : w // 2 * 2]
    return x.reshape(c, h // 2, 2, w // 2, 2).max(axis=(2, 4))


def cmr_forward(m_prev, w):
    """One cross-concatenated multi-scale residual block."""
    m_prev = check_tensor3d(m_prev, "block input")
    t1 = relu(conv2d(m_prev, w.t1))
    f1 = relu(conv2d(m_prev, w.f1))
    cat1 = np.concatenate([t1, f1], axis=0)
    t2 = relu(conv2d(cat1, w.t2))
    f2 = relu(conv2d(cat1, w.f2))
    o = conv2d(np.concatenate([t2, f2], axis=0), w.merge)
    if o.shape != m_prev.shape:
        raise ValueError(
            f"merge output {o.shape} does not match block input {m_prev.shape}")
    return o + m_prev


def dim_forward(x, cfg):
    """Parallel dilated branches with ReLU, concatenated, merged by 1x1."""
    x = check_tensor3d(x, "input")
    branches = [relu(conv2d(x, b)) for b in cfg.branches]
    return conv2d(np.concatenate(branches, axis=0), cfg.merge)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def decoder_forward(x, specs, out_h, out_w):
    """Conv stack (ReLU between, none after the last), sigmoid, bicubic
    upsampling to the requested dims, clamped to [0, 1]."""
    x = check_tensor3d(x, "input")
    for spec in specs[:-1]:
        x = relu(conv2d(x, spec))
    x = conv2d(x, specs[-1])
    if x.shape[0] != 1:
        raise ValueError(f"decoder must end with 1 channel, got {x.shape[0]}")
    sal = _sigmoid(x[0])
    sal = grids.resize(sal, out_h, out_w, "bicubic")
    return np.clip(sal, 0.0, 1.0)


# Named taps dumped by cmrnet_forward, with their manifest layer indices.
_DUMP_ORDER = ("stem", "cmr1", "cmr2", "cmr3", "dim")


def cmrnet_forward(image, weights, dump_dir=None, image_path=""):
    """Full forward pass: stem, three CMR blocks with pooling, DIM, decoder.

    Returns (saliency_map, manifest); manifest is None unless dump_dir is
    given, in which case each named intermediate tensor is written as an
    array file alongside a manifest JSON.
    """
    lum = to_luminance(image)
    h, w = lum.shape
    taps = {}
    x = relu(conv2d(lum[np.newaxis], weights.stem))
    taps["stem"] = x
    for i, (lift, block) in enumerate(zip(weights.lifts, weights.blocks)):
        if lift is not None:
            x = relu(conv2d(x, lift))
        x = cmr_forward(x, block)
        taps[f"cmr{i + 1}"] = x
        x = max_pool2(x)
    x = dim_forward(x, weights.dim)
    taps["dim"] = x
    sal = decoder_forward(x, weights.decoder, h, w)

    manifest = None
    if dump_dir is not None:
        dump_dir = Path(dump_dir)
        dump_dir.mkdir(parents=True, exist_ok=True)
        layers = []
        for pos, name in enumerate(_DUMP_ORDER):
            fname = f"layer{pos + 2:03d}_{name}.npy"
            grids.save_array(taps[name], dump_dir / fname)
            layers.append(LayerEntry(index=pos + 2, file=fname,
                                     shape=taps[name].shape))
        manifest = LayerManifest(model="cmr-ref", input_image=str(image_path),
                                 layers=layers)
        with open(dump_dir / "manifest.json", "w") as f:
            json.dump({
                "model": manifest.model,
                "input_image": manifest.input_image,
                "layers": [{"index": e.index, "file": e.file,
                            "shape": list(e.shape)} for e in layers],
            }, f, indent=2)
    return sal, manifest


def loss(p, g):
    """L1 distance between sum-normalized maps; scale-invariant, in [0, 2]."""
    p = np.asarray(p, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {g.shape}")
    ps, gs = p.sum(), g.sum()
    if ps <= 0 or gs <= 0:
        raise ValueError("maps must have positive sums for normalization")
    return float(np.abs(p / ps - g / gs).sum())


def _rand_conv(rng, out_ch, in_ch, k, dilation=1):
    a = np.sqrt(1.0 / (in_ch * k * k))
    return ConvSpec(
        weights=rng.uniform(-a, a, size=(out_ch, in_ch, k, k)),
        bias=rng.uniform(-a, a, size=out_ch),
        dilation=dilation,
    )


def _rand_block(rng, ch):
    return CMRBlockWeights(
        t1=_rand_conv(rng, ch, ch, 3),
        f1=_rand_conv(rng, ch, ch, 5),
        t2=_rand_conv(rng, ch, 2 * ch, 3),
        f2=_rand_conv(rng, ch, 2 * ch, 5),
        merge=_rand_conv(rng, ch, 2 * ch, 1),
    )


def synth_weights(seed, channels=(16, 32, 64), dim_branch=32, decoder_mid=32):
    """Deterministic random weight bundle, uniform in +-sqrt(1/(in*k^2))."""
    rng = np.random.default_rng(seed)
    c1, c2, c3 = channels
    return CMRNetWeights(
        stem=_rand_conv(rng, c1, 1, 3),
        lifts=(None, _rand_conv(rng, c2, c1, 1), _rand_conv(rng, c3, c2, 1)),
        blocks=tuple(_rand_block(rng, c) for c in channels),
        dim=DIMConfig(
            branches=tuple(_rand_conv(rng, dim_branch, c3, 3, dilation=r)
                           for r in DIM_RATES),
            merge=_rand_conv(rng, c3, dim_branch * len(DIM_RATES), 1),
        ),
        decoder=(_rand_conv(rng, decoder_mid, c3, 3),
                 _rand_conv(rng, 1, decoder_mid, 3)),
    )


def _iter_named_specs(weights):
    yield "stem", weights.stem, "stem"
    for i, lift in enumerate(weights.lifts):
        if lift is not None:
            yield f"lift{i + 1}", lift, "lift"
    for i, b in enumerate(weights.blocks):
        for part in ("t1", "f1", "t2", "f2", "merge"):
            yield f"block{i + 1}.{part}", getattr(b, part), "cmr"
    for i, b in enumerate(weights.dim.branches):
        yield f"dim.branch{i + 1}", b, "dim"
    yield "dim.merge", weights.dim.merge, "dim"
    for i, d in enumerate(weights.decoder):
        yield f"decoder{i + 1}", d, "decoder"


def save_weights(weights, out_dir):
    """Write a weight bundle: one array file per conv plus a JSON index."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = []
    for name, spec, role in _iter_named_specs(weights):
        base = name.replace(".", "_")
        o, i, k, _ = spec.weights.shape
        grids.save_array(spec.weights.reshape(o * i, k, k),
                         out_dir / f"{base}_w.npy", dtype="<f8")
        grids.save_array(spec.bias.reshape(1, 1, -1),
                         out_dir / f"{base}_b.npy", dtype="<f8")
        index.append({"name": name, "role": role,
                      "shape": [o, i, k, k], "dilation": spec.dilation,
                      "weights": f"{base}_w.npy", "bias": f"{base}_b.npy"})
    with open(out_dir / "index.json", "w") as f:
        json.dump(index, f, indent=2)


def load_weights(bundle_dir):
    bundle_dir = Path(bundle_dir)
    with open(bundle_dir / "index.json") as f:
        index = {e["name"]: e for e in json.load(f)}

    def spec(name):
        e = index[name]
        w = grids.load_array(bundle_dir / e["weights"]).reshape(e["shape"])
        b = grids.load_array(bundle_dir / e["bias"]).reshape(-1)
        return ConvSpec(weights=w, bias=b, dilation=e.get("dilation", 1))

    n_blocks = len({k.split(".")[0] for k in index if k.startswith("block")})
    return CMRNetWeights(
        stem=spec("stem"),
        lifts=tuple(spec(f"lift{i + 1}") if f"lift{i + 1}" in index else None
                    for i in range(n_blocks)),
        blocks=tuple(
            CMRBlockWeights(**{part: spec(f"block{i + 1}.{part}")
                               for part in ("t1", "f1", "t2", "f2", "merge")})
            for i in range(n_blocks)),
        dim=DIMConfig(
            branches=tuple(spec(f"dim.branch{i + 1}")
                           for i in range(len(DIM_RATES))),
            merge=spec("dim.merge")),
        decoder=tuple(spec(f"decoder{i + 1}")
                      for i in range(sum(1 for k in index
                                         if k.startswith("decoder")))),
    )
