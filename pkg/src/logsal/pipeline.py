"""Layer-by-layer explainable reconstruction of activation maps.

The flow per layer: scale each activation map, match it against the
response pool by block-variance MAE, rebuild it as an inverse-MAE weighted
sum of the best responses, fuse the scales, keep the best-reconstructed
maps, and refilter those to form the next layer's pool. After the last
layer the kept maps are combined into the final saliency map.
"""

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from . import grids, loggabor
from .blockstats import block_variance, mae_vargrids, mae_maps
from .validation import check_grid, check_tensor3d

__all__ = [
    "PipelineConfig",
    "MatchResult",
    "ReconstructedMap",
    "LayerManifest",
    "ManifestError",
    "load_manifest",
    "to_luminance",
    "make_scales",
    "match_topk",
    "reconstruct_scale",
    "fuse_scales",
    "reconstruct_layer",
    "next_response_pool",
    "finalize_saliency",
    "run_pipeline",
]

DEFAULT_SCALES = (0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class PipelineConfig:
    k_filters: int = 10
    k_keep: int = 10
    scales: tuple = DEFAULT_SCALES
    epsilon: float = 1e-12
    min_dim: int = 8
    combine: str = "mean"
    blur_sigma: float = 0.0
    block: int = 8

    def __post_init__(self):
        if self.k_filters < 1 or self.k_keep < 1:
            raise ValueError("k_filters and k_keep must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if 1.0 not in self.scales:
            raise ValueError("scale set must contain 1")
        if any(s <= 0 for s in self.scales):
            raise ValueError("scale factors must be positive")


@dataclass
class MatchResult:
    """Top-k pool responses for one (activation, scale): indices in
    ascending-MAE order and their unit-normalized inverse-MAE weights."""

    indices: list
    maes: np.ndarray
    weights: np.ndarray


@dataclass
class ReconstructedMap:
    map: np.ndarray
    source: int
    recon_mae: float
    per_scale: list = field(default_factory=list)  # (factor, MatchResult)


class ManifestError(ValueError):
    """Manifest file violates the layer-stack schema."""

    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


@dataclass
class LayerEntry:
    index: int
    file: str
    shape: tuple


@dataclass
class LayerManifest:
    model: str
    input_image: str
    layers: list


def load_manifest(path):
    """Parse and validate a layer manifest; layers come back sorted by index."""
    path = Path(path)
    try:
        with open(path) as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}")
    try:
        layers = [
            LayerEntry(index=int(e["index"]), file=str(e["file"]),
                       shape=tuple(int(d) for d in e["shape"]))
            for e in raw["layers"]
        ]
        manifest = LayerManifest(model=str(raw.get("model", "")),
                                 input_image=str(raw.get("input_image", "")),
                                 layers=layers)
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"malformed manifest {path}: {exc}")
    if not layers:
        raise ManifestError(f"manifest {path} has no layers")
    manifest.layers.sort(key=lambda e: e.index)
    for prev, cur in zip(manifest.layers, manifest.layers[1:]):
        if cur.index == prev.index:
            raise ManifestError(f"duplicate layer index {cur.index}",
                                layer=cur.index)
    for e in manifest.layers:
        if len(e.shape) != 3 or any(d < 1 for d in e.shape):
            raise ManifestError(f"layer {e.index} has invalid shape {e.shape}",
                                layer=e.index)
    return manifest


def to_luminance(image):
    """Single luminance channel in [0, 1] (BT.601 for 3-channel input)."""
    a = np.asarray(image, dtype=np.float64)
    if a.ndim == 2:
        lum = a
    elif a.ndim == 3 and a.shape[2] == 3:
        lum = 0.299 * a[:, :, 0] + 0.587 * a[:, :, 1] + 0.114 * a[:, :, 2]
    elif a.ndim == 3 and a.shape[2] == 1:
        lum = a[:, :, 0]
    else:
        raise ValueError(f"expected 1 or 3 channels, got shape {a.shape}")
    if lum.max() > 1.0:
        lum = lum / 255.0
    return check_grid(lum, "luminance")


def _scale_dims(h, w, scales, min_dim):
    """(factor, out_h, out_w) per retained scale; factor 1 is never skipped."""
    out = []
    for f in scales:
        oh, ow = int(round(h * f)), int(round(w * f))
        if f != 1.0 and min(oh, ow) < min_dim:
            continue
        out.append((f, oh, ow))
    return out


def make_scales(g, scales=DEFAULT_SCALES, min_dim=8):
    """Bilinear rescalings of a grid, dropping scales below min_dim."""
    g = check_grid(g)
    return [
        (f, grids.resize(g, oh, ow, "bilinear"))
        for f, oh, ow in _scale_dims(g.shape[0], g.shape[1], scales, min_dim)
    ]


def match_topk(act, pool, k=10, epsilon=1e-12, block=8, pool_vars=None):
    """Select the k pool responses with the smallest block-variance MAE.

    pool must already be resized to act's dims. Ties break toward the
    lower response index. Weights are inverse MAEs (epsilon-regularized)
    normalized to sum 1.
    """
    act = check_grid(act, "act")
    if len(pool) == 0:
        raise ValueError("response pool is empty")
    if k > len(pool):
        warnings.warn(f"k={k} exceeds pool size {len(pool)}; using full pool")
        k = len(pool)
    act_var = block_variance(act, block)
    if pool_vars is None:
        pool_vars = [block_variance(pool[g], block) for g in range(len(pool))]
    maes = [mae_vargrids(act_var, pool_vars[g]) for g in range(len(pool))]
    order = sorted(range(len(pool)), key=lambda g: (maes[g], g))[:k]
    sel = np.array([maes[g] for g in order])
    inv = 1.0 / (sel + epsilon)
    return MatchResult(indices=order, maes=sel, weights=inv / inv.sum())


def reconstruct_scale(m, pool):
    """Weighted sum of the selected pool responses (convex combination)."""
    out = m.weights[0] * pool[m.indices[0]]
    for w, g in zip(m.weights[1:], m.indices[1:]):
        out = out + w * pool[g]
    return out


def fuse_scales(recons, out_h, out_w):
    """Resize per-scale reconstructions to the target dims and combine as
    the square root of the sum of squares."""
    if not recons:
        raise ValueError("nothing to fuse")
    first = grids.resize(recons[0][1], out_h, out_w, "bilinear")
    acc = first * first
    for _, r in recons[1:]:
        r = grids.resize(r, out_h, out_w, "bilinear")
        acc = acc + r * r
    return np.sqrt(acc)


def reconstruct_layer(acts, pool, cfg=PipelineConfig()):
    """Reconstruct every activation map from the pool and keep the best.

    Returns the cfg.k_keep maps with the smallest reconstruction MAE
    (ties toward lower activation index), each tagged with its source
    activation; one reconstruction per distinct activation.
    """
    acts = check_tensor3d(acts, "acts")
    if len(pool) == 0:
        raise ValueError("response pool is empty")
    n_act, h, w = acts.shape
    dims = _scale_dims(h, w, cfg.scales, cfg.min_dim)
    # Pool resizes and their block variances are shared across activations.
    scaled_pools = {}
    for f, oh, ow in dims:
        resized = np.stack([grids.resize(pool[g], oh, ow, "bilinear")
                            for g in range(len(pool))])
        pvars = [block_variance(resized[g], cfg.block)
                 for g in range(len(pool))]
        scaled_pools[f] = (resized, pvars)
    recon = []
    for a in range(n_act):
        per_scale = []
        matches = []
        for f, oh, ow in dims:
            scaled_act = grids.resize(acts[a], oh, ow, "bilinear")
            resized, pvars = scaled_pools[f]
            m = match_topk(scaled_act, resized, cfg.k_filters, cfg.epsilon,
                           cfg.block, pool_vars=pvars)
            per_scale.append((f, reconstruct_scale(m, resized)))
            matches.append((f, m))
        fused = fuse_scales(per_scale, h, w)
        recon.append(ReconstructedMap(map=fused, source=a,
                                      recon_mae=mae_maps(acts[a], fused),
                                      per_scale=matches))
    recon.sort(key=lambda r: (r.recon_mae, r.source))
    return recon[: cfg.k_keep]


def next_response_pool(kept, bank):
    """Energies of every kept map under every bank filter, map-major."""
    if not kept:
        raise ValueError("no kept maps")
    chunks = []
    for r in kept:
        resized = grids.resize(r.map, bank.height, bank.width, "bilinear")
        chunks.append(loggabor.respond_all(resized, bank))
    return np.concatenate(chunks, axis=0)


def finalize_saliency(kept, out_h, out_w, cfg=PipelineConfig()):
    """Combine kept maps, resize, optionally blur, min-max normalize."""
    if not kept:
        raise ValueError("no kept maps")
    if cfg.combine != "mean":
        raise ValueError(f"unknown combination rule {cfg.combine!r}")
    acc = kept[0].map.copy()
    for r in kept[1:]:
        acc += r.map
    acc /= len(kept)
    sal = grids.resize(acc, out_h, out_w, "bilinear")
    if cfg.blur_sigma > 0:
        sal = cv2.GaussianBlur(sal, (0, 0), cfg.blur_sigma)
    lo, hi = sal.min(), sal.max()
    if hi > lo:
        sal = (sal - lo) / (hi - lo)
    else:
        sal = np.zeros_like(sal)
    return sal


def run_pipeline(image, manifest, bank, cfg=PipelineConfig(), base_dir=None,
                 trace_images=None):
    """Full explainable-saliency run over a layer manifest.

    image is the model's input (grayscale or RGB array). Layer activation
    files resolve relative to base_dir when given. Returns the saliency
    map at the input dims and a JSON-serializable trace. trace_images, if
    set, is a directory that receives per-layer reconstruction PNGs.
    """
    if not manifest.layers:
        raise ManifestError("manifest has no layers")
    lum = to_luminance(image)
    pool = loggabor.respond_all(
        grids.resize(lum, bank.height, bank.width, "bilinear"), bank)
    trace = {"model": manifest.model, "layers": []}
    kept = None
    for pos, entry in enumerate(manifest.layers):
        path = Path(entry.file)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        try:
            acts = grids.load_array(path)
        except (OSError, grids.NpyParseError) as exc:
            raise ManifestError(
                f"layer {entry.index}: cannot load {path}: {exc}",
                layer=entry.index)
        if acts.shape != entry.shape:
            raise ManifestError(
                f"layer {entry.index}: file shape {acts.shape} does not "
                f"match manifest shape {entry.shape}", layer=entry.index)
        kept = reconstruct_layer(acts, pool, cfg)
        trace["layers"].append({
            "index": entry.index,
            "kept": [
                {
                    "a": r.source,
                    "recon_mae": r.recon_mae,
                    "matches_per_scale": [
                        {"scale": f, "indices": list(m.indices),
                         "maes": m.maes.tolist(),
                         "weights": m.weights.tolist()}
                        for f, m in r.per_scale
                    ],
                }
                for r in kept
            ],
        })
        if trace_images is not None:
            out = Path(trace_images)
            out.mkdir(parents=True, exist_ok=True)
            for r in kept:
                grids.save_image(
                    r.map, out / f"layer{entry.index:03d}_act{r.source:03d}.png")
        if pos < len(manifest.layers) - 1:
            pool = next_response_pool(kept, bank)
    sal = finalize_saliency(kept, lum.shape[0], lum.shape[1], cfg)
    return sal, trace
