import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner
from PIL import Image

from conftest import TINY_DOC
from gpdesign.cli import main as cli_main


@pytest.fixture(scope="module")
def doc_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "tiny.json"
    path.write_text(json.dumps(TINY_DOC))
    return str(path)


@pytest.fixture()
def runner():
    return CliRunner()


def _invoke(runner, doc_path, out_dir, *args):
    return runner.invoke(
        cli_main, ["--config", doc_path, "--out", str(out_dir), *args])


def test_run_all_then_stage_commands_hit_cache(runner, doc_path, tiny_config,
                                               tiny_bundle):
    out = tiny_config.out_dir
    res = _invoke(runner, doc_path, out, "run-all")
    assert res.exit_code == 0, res.output
    assert "bundle:" in res.output
    for command in ("gen-data", "fit-spgd", "build-table", "train-map", "fit-gmm"):
        res = _invoke(runner, doc_path, out, command)
        assert res.exit_code == 0, res.output
        assert ".gpdc" in res.output
    for which in ("geometry", "spatial", "m1", "m2"):
        res = _invoke(runner, doc_path, out, "train-rrae", which)
        assert res.exit_code == 0, res.output


def test_unknown_config_key_rejected(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n_trian": 64}))
    res = runner.invoke(cli_main, ["--config", str(bad), "gen-data"])
    assert res.exit_code != 0
    assert "[config]" in res.output


def test_malformed_json_rejected(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    res = runner.invoke(cli_main, ["--config", str(bad), "gen-data"])
    assert res.exit_code != 0
    assert "[config]" in res.output


def test_stage_failure_reports_stage(runner, tmp_path):
    doc = dict(TINY_DOC, spgd={"d_s": 40})
    path = tmp_path / "doomed.json"
    path.write_text(json.dumps(doc))
    res = runner.invoke(
        cli_main, ["--config", str(path), "--out", str(tmp_path / "run"), "run-all"])
    assert res.exit_code != 0
    assert "[spgd]" in res.output


def test_train_rrae_rejects_unknown_model(runner, doc_path, tmp_path):
    res = _invoke(runner, doc_path, tmp_path, "train-rrae", "bogus")
    assert res.exit_code != 0


def test_workflow_commands_need_bundle(runner, doc_path, tmp_path):
    mask_png = tmp_path / "mask.png"
    Image.fromarray(np.zeros((16, 16), np.uint8), "L").save(mask_png)
    for args in (["reconstruct", "--image", str(mask_png)],
                 ["generate", "--n", "1"],
                 ["serve"]):
        res = _invoke(runner, doc_path, tmp_path / "empty", *args)
        assert res.exit_code != 0
        assert "no bundle" in res.output


def test_reconstruct_writes_field_files(runner, doc_path, tiny_config,
                                        tiny_bundle, tmp_path):
    from gpdesign.container import read_dataset
    from gpdesign.microgen import container_to_images

    images = container_to_images(
        read_dataset(Path(tiny_config.out_dir) / "dataset.gpdc"))
    mask_png = tmp_path / "mask.png"
    Image.fromarray(images[0].pixels.astype(np.uint8) * 255, "L").save(mask_png)

    res = _invoke(runner, doc_path, tiny_config.out_dir,
                  "reconstruct", "--image", str(mask_png))
    assert res.exit_code == 0, res.output
    report = json.loads(res.output)
    assert report["field_min"] <= report["field_mean"] <= report["field_max"]
    field = np.load(report["field_npy"])
    assert field.shape == (16, 16)
    assert np.all(np.isfinite(field))
    assert Path(report["field_png"]).exists()


def test_reconstruct_rejects_wrong_size_and_bad_mu(runner, doc_path,
                                                   tiny_config, tiny_bundle,
                                                   tmp_path):
    big = tmp_path / "big.png"
    Image.fromarray(np.zeros((32, 32), np.uint8), "L").save(big)
    res = _invoke(runner, doc_path, tiny_config.out_dir,
                  "reconstruct", "--image", str(big))
    assert res.exit_code != 0
    assert "32x32" in res.output

    ok = tmp_path / "ok.png"
    Image.fromarray(np.zeros((16, 16), np.uint8), "L").save(ok)
    res = _invoke(runner, doc_path, tiny_config.out_dir,
                  "reconstruct", "--image", str(ok), "--mu1", "10.0")
    assert res.exit_code != 0
    assert "[reconstruct]" in res.output


def test_generate_writes_masks_and_alphas(runner, doc_path, tiny_config,
                                          tiny_bundle):
    out = Path(tiny_config.out_dir)
    res = _invoke(runner, doc_path, out, "generate", "--n", "3", "--seed", "9")
    assert res.exit_code == 0, res.output
    gen = out / "generated"
    alphas = np.load(gen / "alphas.npy")
    assert alphas.shape == (3, 4)
    for i in range(3):
        mask = np.asarray(Image.open(gen / f"design_{i:04d}.png"))
        assert mask.shape == (16, 16)
        assert set(np.unique(mask)) <= {0, 255}

    res = _invoke(runner, doc_path, out, "generate", "--n", "0")
    assert res.exit_code != 0
    assert "[generate]" in res.output


def test_eval_writes_metrics_json(runner, doc_path, tiny_config, tiny_bundle):
    out = Path(tiny_config.out_dir)
    res = _invoke(runner, doc_path, out, "eval")
    assert res.exit_code == 0, res.output
    report = json.loads((out / "eval.json").read_text())
    assert "autoencoders" in report and "generation" in report
    echoed = json.loads(res.output)
    assert echoed == report
