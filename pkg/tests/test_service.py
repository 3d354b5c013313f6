import base64
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pytest

pytest.importorskip("fastapi")

from fastapi.testclient import TestClient

from gpdesign import service
from gpdesign.container import read_dataset
from gpdesign.microgen import container_to_images
from gpdesign.oracle import MaterialPoint
from gpdesign.pipeline import reconstruct_for_geometry
from gpdesign.rrae import encode
from gpdesign.spgd import evaluate

pytestmark = pytest.mark.filterwarnings("ignore::DeprecationWarning")

MU = {"mu1": 1200.0, "mu2": 30000.0}


@pytest.fixture(scope="module")
def client(tiny_bundle):
    app = service.build_app(tiny_bundle)
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c


@pytest.fixture(scope="module")
def train_image(tiny_config):
    images = container_to_images(
        read_dataset(Path(tiny_config.out_dir) / "dataset.gpdc"))
    return images[0]


def _mask_b64(pixels):
    return base64.b64encode(np.asarray(pixels, np.uint8).tobytes()).decode()


def test_health_reports_bundle_digest(client, tiny_bundle):
    body = client.get("/health").json()
    assert body["status"] == "ok"
    assert body["bundle"] == service.bundle_digest(tiny_bundle)
    assert len(body["bundle"]) == 64


def test_encode_matches_direct_call(client, tiny_bundle, train_image):
    r = client.post("/encode", json={"image": _mask_b64(train_image.pixels)})
    assert r.status_code == 200
    direct = encode(tiny_bundle.geometry,
                    train_image.pixels[None].astype(np.float64))
    assert np.allclose(r.json()["alpha"], direct)


def test_explore_equals_reconstruct_path_exactly(client, tiny_bundle,
                                                 train_image):
    alpha = encode(tiny_bundle.geometry,
                   train_image.pixels[None].astype(np.float64))
    r = client.post("/explore", json={"alpha": list(alpha), **MU})
    assert r.status_code == 200
    payload = r.json()
    field = np.frombuffer(base64.b64decode(payload["field"]),
                          "<f4").reshape(payload["field_shape"])
    direct = evaluate(reconstruct_for_geometry(tiny_bundle, train_image),
                      MaterialPoint(MU["mu1"], MU["mu2"])).astype("<f4")
    assert np.array_equal(field, direct)
    assert payload["field_min"] == pytest.approx(float(field.min()))
    assert payload["field_max"] == pytest.approx(float(field.max()))
    assert len(payload["modes_summary"]) == 3
    for mode in payload["modes_summary"]:
        assert set(mode) == {"m1", "m2", "field_rms"}


def test_explore_image_route_equals_alpha_route(client, tiny_bundle, train_image):
    alpha = encode(tiny_bundle.geometry,
                   train_image.pixels[None].astype(np.float64))
    via_alpha = client.post("/explore", json={"alpha": list(alpha), **MU})
    via_image = client.post("/explore",
                            json={"image": _mask_b64(train_image.pixels), **MU})
    assert via_alpha.content == via_image.content


def test_explore_repeat_is_byte_identical(client, tiny_bundle):
    alpha = list(tiny_bundle.alpha_train[3])
    a = client.post("/explore", json={"alpha": alpha, **MU})
    b = client.post("/explore", json={"alpha": alpha, **MU})
    assert a.status_code == 200
    assert a.content == b.content


def test_explore_concurrent_requests_agree(client, tiny_bundle):
    alpha = list(tiny_bundle.alpha_train[1])
    payload = {"alpha": alpha, **MU}

    def call(_):
        return client.post("/explore", json=payload)

    with ThreadPoolExecutor(max_workers=8) as pool:
        responses = list(pool.map(call, range(16)))
    assert all(r.status_code == 200 for r in responses)
    assert len({r.content for r in responses}) == 1


def test_explore_requires_exactly_one_input(client, tiny_bundle, train_image):
    alpha = list(tiny_bundle.alpha_train[0])
    both = client.post("/explore", json={
        "alpha": alpha, "image": _mask_b64(train_image.pixels), **MU})
    neither = client.post("/explore", json=MU)
    assert both.status_code == 400
    assert both.json()["code"] == "alpha_or_image"
    assert neither.status_code == 400
    assert neither.json()["code"] == "alpha_or_image"


def test_explore_validates_alpha_and_image(client, tiny_bundle):
    r = client.post("/explore", json={"alpha": [1.0, 2.0], **MU})
    assert r.status_code == 400 and r.json()["code"] == "bad_alpha"
    r = client.post("/explore", json={"image": "@@not-base64@@", **MU})
    assert r.status_code == 400 and r.json()["code"] == "bad_image"
    short = base64.b64encode(b"\x01" * 10).decode()
    r = client.post("/explore", json={"image": short, **MU})
    assert r.status_code == 400 and r.json()["code"] == "bad_image"


def test_explore_rejects_out_of_range_mu(client, tiny_bundle):
    alpha = list(tiny_bundle.alpha_train[0])
    low = client.post("/explore", json={"alpha": alpha,
                                        "mu1": 100.0, "mu2": 30000.0})
    assert low.status_code == 422
    assert low.json()["code"] == "mu1_out_of_range"
    high = client.post("/explore", json={"alpha": alpha,
                                         "mu1": 1200.0, "mu2": 99000.0})
    assert high.status_code == 422
    assert high.json()["code"] == "mu2_out_of_range"


def test_explore_downsample_factor(client, tiny_bundle):
    alpha = list(tiny_bundle.alpha_train[0])
    r = client.post("/explore", json={"alpha": alpha, **MU,
                                      "field_resolution": 2})
    assert r.status_code == 200
    assert r.json()["field_shape"] == [8, 8]
    raw = base64.b64decode(r.json()["field"])
    assert len(raw) == 8 * 8 * 4
    bad = client.post("/explore", json={"alpha": alpha, **MU,
                                        "field_resolution": 0})
    assert bad.status_code == 400
    assert bad.json()["code"] == "bad_field_resolution"


def test_generate_contract(client, tiny_bundle):
    zero = client.post("/generate", json={"n": 0})
    assert zero.status_code == 400 and zero.json()["code"] == "bad_count"
    r = client.post("/generate", json={"n": 3, "seed": 5})
    assert r.status_code == 200
    body = r.json()
    assert len(body["alphas"]) == 3 and len(body["images"]) == 3
    res = tiny_bundle.resolution
    for blob in body["images"]:
        mask = np.frombuffer(base64.b64decode(blob), np.uint8)
        assert mask.shape == (res * res,)
        assert set(np.unique(mask)) <= {0, 1}
    again = client.post("/generate", json={"n": 3, "seed": 5})
    assert again.content == r.content


def test_latent_bounds_are_training_quantiles(client, tiny_bundle):
    body = client.get("/latent-bounds").json()
    lo = np.percentile(tiny_bundle.alpha_train, 1.0, axis=0)
    hi = np.percentile(tiny_bundle.alpha_train, 99.0, axis=0)
    assert np.allclose(body["lo"], lo)
    assert np.allclose(body["hi"], hi)
    assert all(a < b for a, b in zip(body["lo"], body["hi"]))


def test_internal_errors_hide_details(tiny_bundle, monkeypatch):
    app = service.build_app(tiny_bundle)
    monkeypatch.setattr(service, "assemble_from_alpha",
                        lambda *a, **k: (_ for _ in ()).throw(
                            RuntimeError("secret internals")))
    with TestClient(app, raise_server_exceptions=False) as c:
        r = c.post("/explore",
                   json={"alpha": list(tiny_bundle.alpha_train[0]), **MU})
    assert r.status_code == 500
    body = r.json()
    assert body["code"] == "internal_error"
    assert "error_id" in body
    assert "secret" not in r.text


def test_cors_allows_local_ui_origin(client):
    r = client.options("/explore", headers={
        "Origin": "http://localhost:5173",
        "Access-Control-Request-Method": "POST",
    })
    assert r.status_code == 200
    assert r.headers.get("access-control-allow-origin") == "http://localhost:5173"
