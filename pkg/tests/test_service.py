import base64
import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image as PILImage

from faceinpaint.checkpoint import save_checkpoint
from faceinpaint.config import desk_profile
from faceinpaint.data import synthetic_face_dataset
from faceinpaint.imaging import to_uint8
from faceinpaint.service import create_app
from faceinpaint.training import InpaintTrainer, LandmarkTrainer

SIZE = 64


@pytest.fixture(scope="module")
def checkpoints(tmp_path_factory):
    root = tmp_path_factory.mktemp("ckpts")
    dataset = synthetic_face_dataset(4, SIZE, seed=2)
    cfg = desk_profile(max_steps=1, batch_landmark=2, batch_inpaint=2, seed=0)
    lmk = LandmarkTrainer(dataset, cfg)
    lmk.step()
    inp = InpaintTrainer(dataset, cfg)
    inp.step()
    lmk_path = root / "landmark.ckpt"
    inp_path = root / "inpaint.ckpt"
    save_checkpoint(lmk.checkpoint(), lmk_path)
    save_checkpoint(inp.checkpoint(), inp_path)
    return str(inp_path), str(lmk_path)


@pytest.fixture(scope="module")
def client(checkpoints):
    inp, lmk = checkpoints
    app = create_app(inpaint_checkpoint=inp, landmark_checkpoint=lmk)
    return TestClient(app, raise_server_exceptions=False)


def encode_image(pixels) -> str:
    buf = io.BytesIO()
    PILImage.fromarray(to_uint8(pixels)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode()


def encode_mask(mask_px) -> str:
    buf = io.BytesIO()
    PILImage.fromarray((mask_px * 255).astype(np.uint8), "L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode()


def sample_payload(hole=True, size=SIZE):
    rng = np.random.default_rng(0)
    pixels = rng.uniform(-1, 1, size=(size, size, 3)).astype(np.float32)
    mask = np.zeros((size, size), dtype=np.uint8)
    if hole:
        mask[20:40, 20:40] = 1
    return pixels, {"image": encode_image(pixels), "mask": encode_mask(mask)}


def decode_image(b64: str) -> np.ndarray:
    return np.asarray(PILImage.open(io.BytesIO(base64.b64decode(b64))))


def test_health_reports_fingerprint(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"
    assert "+" in body["model_fingerprint"]


def test_predict_landmarks_shape(client):
    _, payload = sample_payload()
    resp = client.post("/predict-landmarks", json=payload)
    assert resp.status_code == 200
    landmarks = resp.json()["landmarks"]
    assert len(landmarks) == 68
    assert all(0.0 <= x <= 1.0 and 0.0 <= y <= 1.0 for x, y in landmarks)


def test_inpaint_zero_mask_returns_input_pixels(client):
    pixels, payload = sample_payload(hole=False)
    resp = client.post("/inpaint", json=payload)
    assert resp.status_code == 200
    returned = decode_image(resp.json()["image"])
    np.testing.assert_array_equal(returned, to_uint8(pixels))


def test_inpaint_without_landmarks_matches_predict(client):
    _, payload = sample_payload()
    inpaint = client.post("/inpaint", json=payload).json()
    predicted = client.post("/predict-landmarks", json=payload).json()
    assert inpaint["landmarks_used"] == predicted["landmarks"]


def test_inpaint_with_explicit_landmarks_bypasses_predictor(client):
    _, payload = sample_payload()
    template = [[0.5, 0.5]] * 68
    resp = client.post("/inpaint", json={**payload, "landmarks": template})
    assert resp.status_code == 200
    assert resp.json()["landmarks_used"] == [[0.5, 0.5]] * 68


def test_inpaint_deterministic(client):
    _, payload = sample_payload()
    a = client.post("/inpaint", json=payload).json()
    b = client.post("/inpaint", json=payload).json()
    assert a["image"] == b["image"]
    assert a["landmarks_used"] == b["landmarks_used"]


def test_malformed_base64_is_400(client):
    resp = client.post("/inpaint", json={"image": "!!!not-base64!!!", "mask": "aaaa"})
    assert resp.status_code == 400
    body = resp.json()
    assert body["code"] == "bad_base64" and "message" in body


def test_non_png_payload_is_400(client):
    junk = base64.b64encode(b"plain text").decode()
    resp = client.post("/inpaint", json={"image": junk, "mask": junk})
    assert resp.status_code == 400
    assert resp.json()["code"] == "bad_png"


def test_mismatched_mask_dimensions_is_422(client):
    pixels, payload = sample_payload()
    payload["mask"] = encode_mask(np.zeros((SIZE * 2, SIZE * 2), dtype=np.uint8))
    resp = client.post("/inpaint", json=payload)
    assert resp.status_code == 422
    assert resp.json()["code"] == "bad_dimensions"


def test_bad_landmark_count_is_422(client):
    _, payload = sample_payload()
    resp = client.post("/inpaint", json={**payload, "landmarks": [[0.5, 0.5]] * 5})
    assert resp.status_code == 422
    assert resp.json()["code"] == "bad_landmarks"


def test_oversized_payload_is_413(checkpoints):
    inp, lmk = checkpoints
    app = create_app(inpaint_checkpoint=inp, landmark_checkpoint=lmk, max_payload=64)
    tiny_client = TestClient(app, raise_server_exceptions=False)
    _, payload = sample_payload()
    resp = tiny_client.post("/inpaint", json=payload)
    assert resp.status_code == 413
    assert resp.json()["code"] == "payload_too_large"


def test_no_model_loaded_is_503():
    bare = TestClient(create_app(), raise_server_exceptions=False)
    assert bare.get("/health").json()["status"] == "degraded"
    _, payload = sample_payload()
    resp = bare.post("/inpaint", json=payload)
    assert resp.status_code == 503
    assert resp.json()["code"] == "model_not_loaded"


def test_non_square_input_round_trips_at_native_resolution(client):
    rng = np.random.default_rng(1)
    pixels = rng.uniform(-1, 1, size=(48, 96, 3)).astype(np.float32)
    mask = np.zeros((48, 96), dtype=np.uint8)
    mask[10:30, 40:70] = 1
    payload = {"image": encode_image(pixels), "mask": encode_mask(mask)}
    resp = client.post("/inpaint", json=payload)
    assert resp.status_code == 200
    returned = decode_image(resp.json()["image"])
    assert returned.shape == (48, 96, 3)
    outside = mask == 0
    np.testing.assert_array_equal(returned[outside], to_uint8(pixels)[outside])
