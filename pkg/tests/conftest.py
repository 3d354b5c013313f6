import os

# pick a numba threading layer that exists everywhere and keep runs single-threaded
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")
os.environ.setdefault("NUMBA_NUM_THREADS", "1")

import pytest


@pytest.fixture
def backend_guard():
    """Reset any forced kernel backend after a test that switches it."""
    from gpdesign.backend import set_backend

    yield set_backend
    set_backend(None)


# A pipeline configuration small enough to train end to end in seconds.
# Shared by the pipeline, CLI, and service suites through one session run.
TINY_DOC = {
    "n_train": 32,
    "n_test": 2,
    "resolution": 16,
    "gmm_k_max": 5,
    "geometry": {"k_max": 4, "latent_dim": 48, "batch_size": 8,
                 "schedule": [[30, 1e-3]]},
    "spatial": {"k_max": 6, "latent_dim": 128, "batch_size": 8, "seed": 1,
                "schedule": [[30, 1e-3]]},
    "m1": {"k_max": 3, "batch_size": 8, "seed": 2, "schedule": [[20, 1e-3]]},
    "m2": {"k_max": 3, "batch_size": 8, "seed": 3, "schedule": [[20, 1e-3]]},
}


def tiny_config_for(out_dir, **overrides):
    from gpdesign.pipeline import config_from_dict

    doc = {**TINY_DOC, **overrides, "out_dir": str(out_dir)}
    return config_from_dict(doc)


@pytest.fixture(scope="session")
def tiny_config(tmp_path_factory):
    return tiny_config_for(tmp_path_factory.mktemp("tiny_run"))


@pytest.fixture(scope="session")
def tiny_bundle(tiny_config):
    from gpdesign.pipeline import run_training_pipeline

    return run_training_pipeline(tiny_config)
