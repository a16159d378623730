import json

import cv2
import numpy as np
import pytest
import torch

from actexport import ExportError, default_layer_names, export, load_model
from actexport.cli import main


class TinyNet(torch.nn.Module):
    """Stand-in for a pretrained saliency backbone: a few named blocks
    ending in a single-channel map."""

    def __init__(self):
        super().__init__()
        self.stem = torch.nn.Sequential(
            torch.nn.Conv2d(3, 8, 3, padding=1), torch.nn.ReLU())
        self.block1 = torch.nn.Sequential(
            torch.nn.Conv2d(8, 16, 3, padding=1), torch.nn.ReLU(),
            torch.nn.MaxPool2d(2))
        self.block2 = torch.nn.Sequential(
            torch.nn.Conv2d(16, 16, 3, padding=1), torch.nn.ReLU())
        self.head = torch.nn.Conv2d(16, 1, 1)

    def forward(self, x):
        x = self.stem(x)
        x = self.block1(x)
        x = self.block2(x)
        return torch.sigmoid(self.head(x))


@pytest.fixture(scope="module")
def weights_file(tmp_path_factory):
    torch.manual_seed(17)
    model = TinyNet().eval()
    path = tmp_path_factory.mktemp("weights") / "tiny.pt"
    torch.save(model, str(path))
    return path


@pytest.fixture(scope="module")
def image_file(tmp_path_factory):
    rng = np.random.default_rng(3)
    path = tmp_path_factory.mktemp("img") / "scene.png"
    cv2.imwrite(str(path), (rng.random((24, 32, 3)) * 255).astype(np.uint8))
    return path


class TestExport:
    def test_manifest_schema(self, weights_file, image_file, tmp_path):
        m = export("unisal", image_file, weights_file, tmp_path)
        indices = [e["index"] for e in m["layers"]]
        assert indices == sorted(indices)
        assert len(indices) == len(set(indices))
        assert len(m["layers"]) == 4  # stem, block1, block2, head
        for e in m["layers"]:
            t = np.load(tmp_path / e["file"])
            assert t.dtype == np.float32
            assert list(t.shape) == e["shape"]
            assert len(t.shape) == 3

    def test_raw_activations_unnormalized(self, weights_file, image_file,
                                          tmp_path):
        m = export("unisal", image_file, weights_file, tmp_path)
        model = load_model("unisal", weights_file)
        from actexport.export import _load_input
        with torch.no_grad():
            want = model.stem(_load_input(image_file, "unisal"))
        got = np.load(tmp_path / m["layers"][0]["file"])
        np.testing.assert_array_equal(got, want[0].numpy())

    def test_reexport_byte_identical(self, weights_file, image_file,
                                     tmp_path):
        export("unisal", image_file, weights_file, tmp_path / "a")
        export("unisal", image_file, weights_file, tmp_path / "b")
        for f in sorted((tmp_path / "a").iterdir()):
            if f.suffix == ".npy":
                assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_explicit_layer_list(self, weights_file, image_file, tmp_path):
        m = export("unisal", image_file, weights_file, tmp_path,
                   layers=["block1", "block2"])
        assert [e["file"].split("_", 1)[1] for e in m["layers"]] == [
            "block1.npy", "block2.npy"]

    def test_all_hooks_leaves(self, weights_file, image_file, tmp_path):
        m = export("unisal", image_file, weights_file, tmp_path,
                   layers="all")
        # every leaf conv/relu/pool with a spatial output gets captured
        assert len(m["layers"]) > 4

    def test_unknown_layer_name(self, weights_file, image_file, tmp_path):
        with pytest.raises(ExportError, match="not found"):
            export("unisal", image_file, weights_file, tmp_path,
                   layers=["no_such_block"])

    def test_unknown_model_id(self, weights_file, image_file, tmp_path):
        with pytest.raises(ExportError, match="unknown model id"):
            export("salgan", image_file, weights_file, tmp_path)

    def test_torchscript_archive_rejected(self, image_file, tmp_path):
        path = tmp_path / "scripted.pt"
        torch.jit.save(torch.jit.script(TinyNet().eval()), str(path))
        with pytest.raises(ExportError, match="TorchScript"):
            export("unisal", image_file, path, tmp_path)

    def test_missing_weights(self, image_file, tmp_path):
        with pytest.raises(ExportError, match="not found"):
            export("unisal", image_file, tmp_path / "no.pt", tmp_path)

    def test_default_layer_names(self, weights_file):
        model = load_model("msinet", weights_file)
        assert default_layer_names(model) == ["stem", "block1", "block2",
                                              "head"]


class TestCli:
    def test_export_roundtrip(self, weights_file, image_file, tmp_path):
        out = tmp_path / "dump"
        assert main(["export", "--model", "unisal",
                     "--image", str(image_file),
                     "--weights", str(weights_file),
                     "--out", str(out)]) == 0
        with open(out / "manifest.json") as f:
            assert len(json.load(f)["layers"]) == 4

    def test_layer_list_flag(self, weights_file, image_file, tmp_path):
        out = tmp_path / "dump"
        assert main(["export", "--model", "msinet",
                     "--image", str(image_file),
                     "--weights", str(weights_file),
                     "--layers", "stem,head", "--out", str(out)]) == 0
        with open(out / "manifest.json") as f:
            assert len(json.load(f)["layers"]) == 2

    def test_bad_layer_exit_code(self, weights_file, image_file, tmp_path):
        assert main(["export", "--model", "unisal",
                     "--image", str(image_file),
                     "--weights", str(weights_file),
                     "--layers", "bogus", "--out", str(tmp_path)]) == 3


class TestPrimaryCompatibility:
    """The exported files and manifest are the interface to the
    reconstruction pipeline; verify they load there unchanged."""

    def test_manifest_feeds_pipeline(self, weights_file, image_file,
                                     tmp_path):
        logsal = pytest.importorskip("logsal")
        from logsal import grids, loggabor
        from logsal.pipeline import PipelineConfig, load_manifest, run_pipeline

        export("unisal", image_file, weights_file, tmp_path)
        manifest = load_manifest(tmp_path / "manifest.json")
        assert len(manifest.layers) == 4
        for e in manifest.layers:
            t = grids.load_array(tmp_path / e.file)
            assert t.shape == e.shape
        image = grids.load_image(image_file)
        bank = loggabor.build_bank(loggabor.default_bank_params(),
                                   image.shape[0], image.shape[1])
        cfg = PipelineConfig(k_filters=5, k_keep=3, scales=(1.0,))
        sal, trace = run_pipeline(image, manifest, bank, cfg,
                                  base_dir=tmp_path)
        assert sal.shape == image.shape[:2]
        assert np.all(np.isfinite(sal))
        assert len(trace["layers"]) == 4
