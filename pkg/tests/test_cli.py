import json
import subprocess
import sys
import time

import numpy as np
import pytest
import requests

from copyaudit import cli, imagecore
from copyaudit.pipeline import PipelineConfig

from conftest import FIXTURES


def run_cli(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestAudit:
    def test_fixture_with_mock_backends(self, tmp_path, capsys):
        code, out, _ = run_cli(
            [
                "audit",
                "--input", str(FIXTURES / "circle.png"),
                "--prompt", "a disk",
                "--out", str(tmp_path),
                "--resolution", "96",
            ],
            capsys,
        )
        assert code == 0
        record = json.loads(out)
        assert set(record) == {
            "source", "prompt", "metrics", "bands", "outputs",
            "config_digest", "timing_ms",
        }
        assert record["bands"]["ssim"] == "poor"

    def test_missing_prompt_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["audit", "--input", "x.png"])
        assert exc.value.code == 2
        assert "usage" in capsys.readouterr().err

    def test_unknown_flag_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["audit", "--input", "x", "--prompt", "p", "--bogus", "1"])
        assert exc.value.code == 2

    def test_unreachable_backend_is_pipeline_error(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "gen_endpoint": {
                "base_url": "http://127.0.0.1:9",
                "timeout": 1, "retries": 0, "backoff": 0.01,
            },
            "target_resolution": 96,
        }))
        code, out, _ = run_cli(
            [
                "audit",
                "--input", str(FIXTURES / "circle.png"),
                "--prompt", "p",
                "--out", str(tmp_path),
                "--config", str(cfg),
            ],
            capsys,
        )
        assert code == 1
        record = json.loads(out)
        assert record["error"]["stage"] == "generate"


class TestConfigPrecedence:
    def test_flag_overrides_file_overrides_default(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"blur_sigma": 2.0, "target_resolution": 96}))
        code, out, _ = run_cli(
            [
                "audit",
                "--input", str(FIXTURES / "circle.png"),
                "--prompt", "p",
                "--out", str(tmp_path),
                "--config", str(cfg),
                "--sigma", "3.0",
            ],
            capsys,
        )
        assert code == 0
        digest = json.loads(out)["config_digest"]
        assert digest == PipelineConfig(blur_sigma=3.0, target_resolution=96).digest()
        assert digest != PipelineConfig(blur_sigma=2.0, target_resolution=96).digest()

    def test_env_var_config_path(self, tmp_path, capsys, monkeypatch):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 77, "target_resolution": 96}))
        monkeypatch.setenv(cli.CONFIG_ENV, str(cfg))
        code, out, _ = run_cli(
            [
                "audit",
                "--input", str(FIXTURES / "circle.png"),
                "--prompt", "p",
                "--out", str(tmp_path),
            ],
            capsys,
        )
        assert code == 0
        assert json.loads(out)["config_digest"] == PipelineConfig(
            seed=77, target_resolution=96
        ).digest()


class TestCompare:
    def test_self_compare(self, capsys):
        path = str(FIXTURES / "circle.png")
        code, out, _ = run_cli(["compare", "--a", path, "--b", path], capsys)
        assert code == 0
        result = json.loads(out)
        assert result["ssim"] == pytest.approx(1.0, abs=1e-12)
        assert result["psnr"] == "inf"
        assert result["fid"] == pytest.approx(0.0, abs=1e-6)
        assert result["bands"]["overall_risk"] == "high-risk"

    def test_dissimilar_fixtures_poor_ssim(self, capsys):
        code, out, _ = run_cli(
            [
                "compare",
                "--a", str(FIXTURES / "circle.png"),
                "--b", str(FIXTURES / "bar.png"),
            ],
            capsys,
        )
        assert code == 0
        assert json.loads(out)["bands"]["ssim"] == "poor"

    def test_mismatched_sizes_exit_1(self, tmp_path, capsys):
        small = imagecore.ImageBuffer.from_array(np.full((32, 32, 3), 0.5))
        p = tmp_path / "small.png"
        p.write_bytes(imagecore.encode_png(small))
        code, _, err = run_cli(
            ["compare", "--a", str(FIXTURES / "circle.png"), "--b", str(p)], capsys
        )
        assert code == 1
        assert "error" in err


class TestStages:
    def test_blur_subcommand(self, tmp_path, capsys):
        out_path = tmp_path / "blurred.png"
        code, _, err = run_cli(
            [
                "blur",
                "--input", str(FIXTURES / "circle.png"),
                "--output", str(out_path),
                "--sigma", "1.5",
            ],
            capsys,
        )
        assert code == 0
        assert out_path.exists()
        blurred = imagecore.decode_png(out_path.read_bytes())
        original = imagecore.decode_png((FIXTURES / "circle.png").read_bytes())
        assert (blurred.width, blurred.height) == (original.width, original.height)

    def test_segment_subcommand(self, tmp_path, capsys):
        out_path = tmp_path / "mask.png"
        code, _, _ = run_cli(
            [
                "segment",
                "--input", str(FIXTURES / "circle.png"),
                "--output", str(out_path),
            ],
            capsys,
        )
        assert code == 0
        mask = imagecore.decode_png(out_path.read_bytes())
        values = set(np.unique(imagecore.quantize(mask)))
        assert values <= {0, 255}


class TestBatchCommand:
    def test_batch_json_array(self, tmp_path, capsys):
        manifest = tmp_path / "m.json"
        manifest.write_text(json.dumps([
            {"path": str(FIXTURES / "circle.png"), "prompt": "a"},
            {"path": str(FIXTURES / "square.png"), "prompt": "b"},
        ]))
        code, out, _ = run_cli(
            [
                "batch",
                "--manifest", str(manifest),
                "--out", str(tmp_path),
                "--resolution", "96",
            ],
            capsys,
        )
        assert code == 0
        records = json.loads(out)
        assert len(records) == 2
        assert records[0]["source"].endswith("circle.png")


class TestServeMock:
    def test_serves_protocol_until_killed(self, tmp_path):
        import socket

        with socket.socket() as s:
            s.bind(("127.0.0.1", 0))
            port = s.getsockname()[1]
        proc = subprocess.Popen(
            [sys.executable, "-m", "copyaudit.cli", "serve-mock", "--port", str(port)],
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
        )
        try:
            url = f"http://127.0.0.1:{port}/segment"
            for _ in range(50):
                try:
                    resp = requests.post(url, json={}, timeout=2)
                    break
                except requests.ConnectionError:
                    time.sleep(0.1)
            else:
                pytest.fail("mock server never came up")
            assert resp.status_code == 400
            assert resp.json()["error"]
        finally:
            proc.terminate()
            proc.wait(timeout=10)
