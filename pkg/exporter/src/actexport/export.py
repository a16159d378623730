"""Hook named modules of a pretrained saliency network and export each
captured activation stack as a float32 NPY file of shape (A, H, W),
together with a JSON manifest listing the layers in forward order.

Arrays are saved raw (no normalization) so the boundary stays lossless;
any scaling belongs to the consumer.
"""

import json
from pathlib import Path

import cv2
import numpy as np
import torch

MODEL_IDS = ("unisal", "msinet")

# Per-model 1/255-scale mean/std used when preparing the input tensor.
_PREPROC = {
    "unisal": ((0.485, 0.456, 0.406), (0.229, 0.224, 0.225)),
    "msinet": ((0.485, 0.456, 0.406), (0.229, 0.224, 0.225)),
}


class ExportError(ValueError):
    """Raised for unknown model ids, missing weights, or bad layer names."""


def load_model(model_id, weights_path):
    """Load pretrained weights as an evaluable torch module.

    Expects a pickled nn.Module (torch.save of the full model). The
    model id only selects preprocessing and default layer granularity;
    the architecture itself comes from the weights file.
    """
    if model_id not in MODEL_IDS:
        raise ExportError(f"unknown model id {model_id!r}; "
                          f"expected one of {', '.join(MODEL_IDS)}")
    weights_path = Path(weights_path)
    if not weights_path.exists():
        raise ExportError(f"weights file not found: {weights_path}")
    try:
        model = torch.load(str(weights_path), map_location="cpu",
                           weights_only=False)
    except Exception as exc:
        try:
            torch.jit.load(str(weights_path), map_location="cpu")
        except Exception:
            raise ExportError(f"cannot load weights {weights_path}: {exc}")
        model = None
    if model is None or isinstance(model, torch.jit.ScriptModule):
        raise ExportError(
            f"{weights_path} is a TorchScript archive, which does not "
            f"support activation hooks; save the full module with "
            f"torch.save instead")
    if not isinstance(model, torch.nn.Module):
        raise ExportError(
            f"{weights_path} does not hold a torch module "
            f"(got {type(model).__name__})")
    model.eval()
    return model


def default_layer_names(model):
    """Top-level named blocks: the coarse granularity used by default."""
    return [name for name, _ in model.named_children()]


def _leaf_layer_names(model):
    return [name for name, mod in model.named_modules()
            if name and not list(mod.children())]


def select_layers(model, selection):
    """Resolve a layer selection to module names in forward-graph order.

    selection is "all" (every leaf module), a list of names, or None for
    the default block-level granularity.
    """
    if selection is None:
        names = default_layer_names(model)
    elif selection == "all":
        names = _leaf_layer_names(model)
    else:
        known = {name for name, _ in model.named_modules() if name}
        missing = [n for n in selection if n not in known]
        if missing:
            raise ExportError(
                f"layer name(s) not found in model: {', '.join(missing)}")
        names = list(selection)
    if not names:
        raise ExportError("model exposes no named layers to hook")
    return names


def _load_input(image_path, model_id):
    img = cv2.imread(str(image_path), cv2.IMREAD_COLOR)
    if img is None:
        raise ExportError(f"cannot read image {image_path}")
    rgb = cv2.cvtColor(img, cv2.COLOR_BGR2RGB).astype(np.float32) / 255.0
    mean, std = _PREPROC[model_id]
    rgb = (rgb - np.asarray(mean, dtype=np.float32)) / np.asarray(
        std, dtype=np.float32)
    return torch.from_numpy(rgb.transpose(2, 0, 1)).unsqueeze(0)


def _to_stack(tensor):
    """Flatten a captured output to (A, H, W) float32, or None if the
    module produced something without a spatial layout."""
    if isinstance(tensor, (tuple, list)):
        tensor = tensor[0] if tensor else None
    if not isinstance(tensor, torch.Tensor) or tensor.dim() < 3:
        return None
    t = tensor.detach()
    if t.dim() == 4:
        t = t.reshape(-1, t.shape[-2], t.shape[-1])
    elif t.dim() > 4:
        return None
    return np.ascontiguousarray(t.cpu().numpy().astype(np.float32))


def export(model_id, image_path, weights_path, out_dir, layers=None,
           model=None):
    """Run one forward pass, dump hooked activations, return the manifest.

    Writes layerNNN_<name>.npy per captured layer plus manifest.json in
    out_dir. Layer indices follow forward execution order.
    """
    if model is None:
        model = load_model(model_id, weights_path)
    elif model_id not in MODEL_IDS:
        raise ExportError(f"unknown model id {model_id!r}; "
                          f"expected one of {', '.join(MODEL_IDS)}")
    names = select_layers(model, layers)
    modules = dict(model.named_modules())

    captured = []  # (order, name, stack) in execution order
    handles = []

    def make_hook(name):
        def hook(_mod, _inp, out):
            stack = _to_stack(out)
            if stack is not None:
                captured.append((name, stack))
        return hook

    for name in names:
        handles.append(modules[name].register_forward_hook(make_hook(name)))
    try:
        with torch.no_grad():
            model(_load_input(image_path, model_id))
    finally:
        for h in handles:
            h.remove()
    if not captured:
        raise ExportError("no spatial activations captured; check the "
                          "layer selection")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for idx, (name, stack) in enumerate(captured):
        safe = name.replace(".", "_") or "root"
        fname = f"layer{idx:03d}_{safe}.npy"
        np.save(out_dir / fname, stack)
        entries.append({"index": idx, "file": fname,
                        "shape": list(stack.shape)})
    manifest = {"model": model_id, "input_image": str(image_path),
                "layers": entries}
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)
    return manifest
