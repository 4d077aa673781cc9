import base64
import importlib.util
import io

import numpy as np
import pytest
from PIL import Image

from mlbackend.codecs import (
    PayloadError,
    decode_image_b64,
    decode_mask_b64,
    encode_gray_b64,
)
from mlbackend.config import AdapterConfig
from mlbackend.models import select_instance

HAS_DIFFUSERS = importlib.util.find_spec("diffusers") is not None


def _png_b64(arr: np.ndarray, mode="L") -> str:
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode()


def _image_payload(size=24) -> dict:
    arr = (np.linspace(0, 255, size * size * 3).reshape(size, size, 3)).astype(
        np.uint8
    )
    return {"image_png_b64": _png_b64(arr, mode="RGB")}


class TestConfig:
    def test_port_range(self):
        with pytest.raises(ValueError):
            AdapterConfig(port=80)
        with pytest.raises(ValueError):
            AdapterConfig(port=70000)

    def test_defaults_valid(self):
        AdapterConfig()


class TestCodecs:
    def test_image_roundtrip_shape(self):
        arr = np.zeros((5, 7, 3), dtype=np.uint8)
        out = decode_image_b64(_png_b64(arr, mode="RGB"))
        assert out.shape == (5, 7, 3)

    def test_mask_threshold(self):
        arr = np.array([[0, 127, 128, 255]], dtype=np.uint8)
        mask = decode_mask_b64(_png_b64(arr))
        assert mask.tolist() == [[False, False, True, True]]

    def test_gray_roundtrip(self):
        soft = np.array([[0.0, 0.5, 1.0]])
        back = decode_image_b64(encode_gray_b64(soft))
        assert np.allclose(back[0, :, 0], [0, 128 / 255, 1.0], atol=1e-9)

    def test_bad_base64(self):
        with pytest.raises(PayloadError):
            decode_image_b64("!!nope!!")

    def test_bad_png(self):
        with pytest.raises(PayloadError):
            decode_image_b64(base64.b64encode(b"junk").decode())


class TestInstanceSelection:
    def test_empty_returns_none(self):
        assert select_instance(np.array([]), np.zeros((0, 4, 4))) is None

    def test_highest_score_wins(self):
        scores = np.array([0.2, 0.9, 0.5])
        masks = np.zeros((3, 4, 4))
        assert select_instance(scores, masks, "score") == 1

    def test_largest_area_wins(self):
        scores = np.array([0.9, 0.1])
        masks = np.zeros((2, 4, 4))
        masks[1, :, :] = 1.0
        assert select_instance(scores, masks, "largest") == 1


class TestHealth:
    def test_ready_after_sync_load(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ready"}


class TestSegmentEndpoint:
    def test_valid_payload_returns_same_size_mask(self, client):
        resp = client.post("/segment", json=_image_payload(24))
        assert resp.status_code == 200
        mask_png = base64.b64decode(resp.json()["mask_png_b64"])
        mask = Image.open(io.BytesIO(mask_png))
        assert mask.size == (24, 24)
        assert mask.mode == "L"

    def test_missing_field_400(self, client):
        resp = client.post("/segment", json={})
        assert resp.status_code == 400
        assert "error" in resp.json()

    def test_malformed_base64_400(self, client):
        resp = client.post("/segment", json={"image_png_b64": "!!bad!!"})
        assert resp.status_code == 400

    def test_unknown_select_mode_400(self, client):
        resp = client.post("/segment?select=weird", json=_image_payload())
        assert resp.status_code == 400

    def test_largest_select_mode(self, client):
        resp = client.post("/segment?select=largest", json=_image_payload())
        assert resp.status_code == 200

    def test_get_is_405(self, client):
        assert client.get("/segment").status_code == 405


class TestGenerateEndpoint:
    def _payload(self):
        mask = np.zeros((16, 16), dtype=np.uint8)
        mask[4:12, 4:12] = 255
        return {
            "prompt": "a landscape",
            "mask_png_b64": _png_b64(mask),
            "seed": 1,
            "steps": 1,
            "avoid_mask": True,
        }

    def test_missing_prompt_400(self, client):
        payload = self._payload()
        del payload["prompt"]
        resp = client.post("/generate", json=payload)
        assert resp.status_code == 400
        assert "error" in resp.json()

    def test_empty_prompt_400(self, client):
        payload = self._payload()
        payload["prompt"] = ""
        assert client.post("/generate", json=payload).status_code == 400

    def test_bad_steps_400(self, client):
        payload = self._payload()
        payload["steps"] = 0
        assert client.post("/generate", json=payload).status_code == 400

    @pytest.mark.skipif(HAS_DIFFUSERS, reason="generation stack installed")
    def test_unconfigured_generation_503(self, client):
        resp = client.post("/generate", json=self._payload())
        assert resp.status_code == 503
        assert "error" in resp.json()

    @pytest.mark.skipif(
        not HAS_DIFFUSERS, reason="requires diffusers + model weights"
    )
    def test_smoke_generation_steps_1(self, client):
        resp = client.post("/generate", json=self._payload())
        assert resp.status_code == 200
        img = Image.open(
            io.BytesIO(base64.b64decode(resp.json()["image_png_b64"]))
        )
        assert img.size == (16, 16)

    @pytest.mark.skipif(
        not HAS_DIFFUSERS, reason="requires diffusers + model weights"
    )
    def test_fixed_seed_repeatability(self, client):
        a = client.post("/generate", json=self._payload()).json()
        b = client.post("/generate", json=self._payload()).json()
        ia = np.asarray(
            Image.open(io.BytesIO(base64.b64decode(a["image_png_b64"])))
        )
        ib = np.asarray(
            Image.open(io.BytesIO(base64.b64decode(b["image_png_b64"])))
        )
        differing = np.any(ia != ib, axis=-1).mean()
        assert differing < 0.01


class TestSharedContractSuite:
    """The same checks the mock server passes, against the real adapter."""

    def test_segment_contract(self, live_server_url):
        contract = pytest.importorskip("copyaudit.contract")
        contract.check_segment_contract(live_server_url, timeout=300)

    def test_error_handling_contract(self, live_server_url):
        contract = pytest.importorskip("copyaudit.contract")
        contract.check_error_handling(live_server_url, timeout=60)

    @pytest.mark.skipif(
        not HAS_DIFFUSERS, reason="requires diffusers + model weights"
    )
    def test_generate_contract(self, live_server_url):
        contract = pytest.importorskip("copyaudit.contract")
        contract.check_generate_contract(live_server_url)
