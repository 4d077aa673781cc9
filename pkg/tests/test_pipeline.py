import json
from pathlib import Path

import numpy as np
import pytest

from copyaudit import imagecore, pipeline
from copyaudit.backends import BackendEndpoint
from copyaudit.errors import ManifestError
from copyaudit.pipeline import PipelineConfig

from conftest import FIXTURES


CFG = PipelineConfig(target_resolution=96)  # fixture-native size keeps tests fast


def _load(name):
    return imagecore.decode_png((FIXTURES / f"{name}.png").read_bytes())


def _strip_timing(d):
    d = dict(d)
    d.pop("timing_ms", None)
    return d


class TestConfig:
    def test_digest_stable(self):
        assert PipelineConfig().digest() == PipelineConfig().digest()

    def test_digest_changes_with_any_field(self):
        base = PipelineConfig().digest()
        assert PipelineConfig(seed=1).digest() != base
        assert PipelineConfig(blur_sigma=2.0).digest() != base
        assert PipelineConfig(avoid_mask=False).digest() != base
        assert (
            PipelineConfig(
                gen_endpoint=BackendEndpoint(base_url="http://x")
            ).digest()
            != base
        )

    def test_from_dict_roundtrip(self):
        cfg = PipelineConfig(
            blur_sigma=2.5, seed=9, seg_endpoint=BackendEndpoint(base_url="http://s")
        )
        back = PipelineConfig.from_dict(cfg.to_dict())
        assert back == cfg
        assert back.digest() == cfg.digest()

    def test_validation(self):
        with pytest.raises(ValueError):
            PipelineConfig(blur_sigma=-1.0)
        with pytest.raises(ValueError):
            PipelineConfig(mask_threshold=2.0)
        with pytest.raises(ValueError):
            PipelineConfig(ssim_window=7)

    def test_default_radius_tracks_sigma(self):
        assert PipelineConfig(blur_sigma=1.0).effective_blur_radius() == 3
        assert PipelineConfig(blur_sigma=2.0).effective_blur_radius() == 6
        assert PipelineConfig(blur_sigma=1.0, blur_radius=5).effective_blur_radius() == 5


class TestRunAudit:
    def test_two_runs_identical(self, tmp_path):
        img = _load("circle")
        r1 = pipeline.run_audit(CFG, img, "a disk", tmp_path / "a", "circle.png")
        r2 = pipeline.run_audit(CFG, img, "a disk", tmp_path / "b", "circle.png")
        d1, d2 = r1.to_dict(include_timing=False), r2.to_dict(include_timing=False)
        d1.pop("outputs")
        d2.pop("outputs")
        assert json.dumps(d1, sort_keys=True) == json.dumps(d2, sort_keys=True)
        for name in ("circle_mask.png", "circle_generated.png", "circle_blurred.png"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()

    def test_portrait_fixture_low_similarity(self, tmp_path):
        img = _load("portrait")
        rec = pipeline.run_audit(CFG, img, "a person", tmp_path, "portrait.png")
        assert rec.report is not None
        assert rec.report.ssim < 0.5
        assert rec.report.ssim_band == "poor"
        assert rec.report.mask_iou < 0.5

    def test_empty_prompt_fails_before_any_stage(self, tmp_path):
        img = _load("circle")
        rec = pipeline.run_audit(CFG, img, "", tmp_path, "circle.png")
        assert rec.report is None
        assert rec.error_stage == "validate"
        assert rec.mask_path is None
        assert rec.timing_ms == {}

    def test_partial_outputs_kept_on_failure(self, tmp_path):
        # unreachable generation backend: mask already written, rest absent
        cfg = PipelineConfig(
            target_resolution=96,
            gen_endpoint=BackendEndpoint(
                base_url="http://127.0.0.1:9", timeout=1, retries=0, backoff=0.01
            ),
        )
        rec = pipeline.run_audit(cfg, _load("circle"), "p", tmp_path, "circle.png")
        assert rec.report is None
        assert rec.error_stage == "generate"
        assert rec.mask_path is not None and Path(rec.mask_path).exists()
        assert rec.generated_path is None

    def test_resize_to_target_resolution(self, tmp_path):
        cfg = PipelineConfig(target_resolution=64)
        rec = pipeline.run_audit(cfg, _load("square"), "p", tmp_path, "square.png")
        mask = imagecore.decode_png(Path(rec.mask_path).read_bytes())
        assert max(mask.width, mask.height) == 64


class TestRunBatch:
    def _manifest(self, names):
        return [(str(FIXTURES / f"{n}.png"), f"prompt {n}") for n in names]

    def test_records_in_manifest_order(self, tmp_path):
        manifest = self._manifest(["circle", "square", "triangle"])
        records = pipeline.run_batch(CFG, manifest, tmp_path, workers=3)
        assert [r.source_path for r in records] == [m[0] for m in manifest]
        assert all(r.report is not None for r in records)

    def test_failed_item_does_not_abort(self, tmp_path):
        manifest = self._manifest(["circle"]) + [
            (str(tmp_path / "missing.png"), "p")
        ] + self._manifest(["square"])
        records = pipeline.run_batch(CFG, manifest, tmp_path, workers=2)
        assert records[0].report is not None
        assert records[1].report is None and records[1].error_stage == "load"
        assert records[2].report is not None

    def test_worker_count_does_not_change_results(self, tmp_path):
        manifest = self._manifest(["circle", "square", "portrait"])
        r1 = pipeline.run_batch(CFG, manifest, tmp_path / "w1", workers=1)
        r4 = pipeline.run_batch(CFG, manifest, tmp_path / "w4", workers=4)
        for a, b in zip(r1, r4):
            da, db = a.to_dict(include_timing=False), b.to_dict(include_timing=False)
            da.pop("outputs")
            db.pop("outputs")
            assert da == db

    def test_empty_manifest_rejected(self, tmp_path):
        with pytest.raises(ManifestError):
            pipeline.run_batch(CFG, [], tmp_path)

    def test_load_manifest(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps([{"path": "a.png", "prompt": "x"}]))
        assert pipeline.load_manifest(path) == [("a.png", "x")]

    def test_load_manifest_errors(self, tmp_path):
        with pytest.raises(ManifestError):
            pipeline.load_manifest(tmp_path / "nope.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ManifestError):
            pipeline.load_manifest(bad)
        empty = tmp_path / "empty.json"
        empty.write_text("[]")
        with pytest.raises(ManifestError):
            pipeline.load_manifest(empty)
