"""Staged training pipeline, bundle persistence, and the online workflows.

The offline chain runs dataset -> surrogate fits -> four autoencoders ->
latent table -> regressors -> density model, writing one container per
stage. Every artifact records a content key derived from its config
subsection plus the upstream artifact bytes, so a rerun skips any stage
whose inputs are unchanged. The assembled bundle then drives the two
online paths: reconstructing the parametric solution for a given geometry
and sampling new designs from the latent density model.
"""

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .container import (
    VERSION as CONTAINER_VERSION,
    DatasetContainer,
    canonical_json,
    read_dataset,
    write_dataset,
)
from .errors import ConsistencyError, ContainerFormatError, StageError
from .genlab import (
    GmmModel,
    bounds_report,
    descriptor_distance,
    fit_gmm,
    sample_latents,
)
from .latentmap import (
    BLOCKS,
    RegressorSet,
    TableStats,
    build_latent_table,
    predict_gammas,
    regressors_from_container,
    regressors_to_container,
    table_from_container,
    table_to_container,
    train_regressors,
)
from .microgen import (
    RVEImage,
    container_to_images,
    generate_images,
    images_to_container,
)
from .numkit import LrSchedule
from .oracle import (
    OracleConfig,
    boundary_profile,
    collocation_grid,
    stress_from_profile,
)
from .rrae import (
    TrainedRRAE,
    curve_preset,
    decode,
    encode,
    geometry_preset,
    reconstruction_loss,
    rrae_from_container,
    rrae_to_container,
    spatial_preset,
    train_rrae,
)
from .spgd import (
    N_CURVE_POINTS,
    N_STORED_MODES,
    AffineMap,
    SeparatedSolution,
    SpgdConfig,
    SpgdMode,
    attach_normalization,
    curve_samples,
    curve_to_lambda,
    fit_spgd,
    make_basis,
    mape,
    solutions_from_container,
    solutions_to_container,
    spatial_channels,
)

BUNDLE_FILENAME = "bundle.gpdc"


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RraeStageConfig:
    """Per-autoencoder knobs; latent_dim None means the preset default.

    schedule, when given, overrides the preset's staged learning rates with
    ((steps, rate), ...) phases; None keeps the preset schedule for the
    active scale.
    """

    k_max: int
    latent_dim: int | None = None
    batch_size: int = 20
    seed: int = 0
    optimizer: str = "adabelief"
    schedule: tuple | None = None


@dataclass(frozen=True)
class PipelineConfig:
    n_train: int = 64
    n_test: int = 16
    resolution: int = 64
    scale: str = "desk"
    data_seed: int = 11
    class_mix: dict | None = None
    oracle: OracleConfig = OracleConfig()
    spgd: SpgdConfig = SpgdConfig()
    geometry: RraeStageConfig = RraeStageConfig(k_max=4, latent_dim=300, seed=0)
    spatial: RraeStageConfig = RraeStageConfig(k_max=12, latent_dim=3000, seed=1)
    m1: RraeStageConfig = RraeStageConfig(k_max=3, seed=2)
    m2: RraeStageConfig = RraeStageConfig(k_max=3, seed=3)
    regressor_seed: int = 0
    gmm_seed: int = 0
    gmm_k_min: int = 1
    gmm_k_max: int = 30
    out_dir: str = "runs/desk"

    def validate(self):
        if self.n_train < 32:
            raise ValueError(f"n_train must be at least 32, got {self.n_train}")
        if self.n_test < 1:
            raise ValueError(f"n_test must be at least 1, got {self.n_test}")
        if self.scale not in ("desk", "paper"):
            raise ValueError(f"scale must be 'desk' or 'paper', got {self.scale!r}")
        if not (1 <= self.gmm_k_min <= self.gmm_k_max):
            raise ValueError(
                f"bad component range [{self.gmm_k_min}, {self.gmm_k_max}]"
            )
        if self.n_train < 2 * self.gmm_k_max:
            raise ValueError(
                f"n_train={self.n_train} supports K up to {self.n_train // 2}; "
                f"lower gmm_k_max from {self.gmm_k_max}"
            )
        if self.class_mix is not None and not isinstance(self.class_mix, dict):
            raise ValueError("class_mix must be a mapping of shape name to weight")
        for which in ("geometry", "spatial", "m1", "m2"):
            stage = getattr(self, which)
            if stage.optimizer not in ("adam", "adabelief"):
                raise ValueError(f"{which}: unknown optimizer {stage.optimizer!r}")
            if self.n_train < stage.batch_size:
                raise ValueError(
                    f"{which}: batch_size {stage.batch_size} exceeds "
                    f"n_train {self.n_train}"
                )
            build_rrae_config(self, which)  # surfaces preset/shape errors early


def profile_config(profile: str = "desk", out_dir=None) -> PipelineConfig:
    """Out-of-box configurations: 'desk' (default) or full-size 'paper'."""
    if profile == "desk":
        cfg = PipelineConfig()
    elif profile == "paper":
        cfg = PipelineConfig(
            n_train=500,
            n_test=99,
            resolution=148,
            scale="paper",
            out_dir="runs/paper",
        )
    else:
        raise ValueError(f"unknown profile {profile!r}")
    if out_dir is not None:
        cfg = replace(cfg, out_dir=str(out_dir))
    return cfg


def config_to_dict(cfg: PipelineConfig) -> dict:
    """Plain JSON-ready mapping covering every configuration field."""
    out = {
        "n_train": cfg.n_train,
        "n_test": cfg.n_test,
        "resolution": cfg.resolution,
        "scale": cfg.scale,
        "data_seed": cfg.data_seed,
        "class_mix": cfg.class_mix,
        "oracle": asdict(cfg.oracle),
        "spgd": {
            key: list(val) if isinstance(val, tuple) else val
            for key, val in asdict(cfg.spgd).items()
        },
        "regressor_seed": cfg.regressor_seed,
        "gmm_seed": cfg.gmm_seed,
        "gmm_k_min": cfg.gmm_k_min,
        "gmm_k_max": cfg.gmm_k_max,
        "out_dir": str(cfg.out_dir),
    }
    for which in ("geometry", "spatial", "m1", "m2"):
        out[which] = asdict(getattr(cfg, which))
    return out


_NESTED_KEYS = ("oracle", "spgd", "geometry", "spatial", "m1", "m2")
_SCALAR_KEYS = (
    "n_train", "n_test", "resolution", "scale", "data_seed", "class_mix",
    "regressor_seed", "gmm_seed", "gmm_k_min", "gmm_k_max", "out_dir",
)


def config_from_dict(data: dict, base: PipelineConfig | None = None) -> PipelineConfig:
    """Overlay a JSON document onto a base configuration (defaults: desk)."""
    if not isinstance(data, dict):
        raise ValueError("configuration document must be a JSON object")
    cfg = base or PipelineConfig()
    for key in data:
        if key not in _SCALAR_KEYS and key not in _NESTED_KEYS:
            raise ValueError(f"unknown configuration key {key!r}")
    updates = {key: data[key] for key in _SCALAR_KEYS if key in data}
    for key in _NESTED_KEYS:
        if key not in data:
            continue
        section = data[key]
        if not isinstance(section, dict):
            raise ValueError(f"configuration section {key!r} must be an object")
        current = getattr(cfg, key)
        if key == "spgd":
            section = dict(section)
            for rng_key in ("mu1_range", "mu2_range"):
                if rng_key in section:
                    section[rng_key] = tuple(float(v) for v in section[rng_key])
        if key in ("geometry", "spatial", "m1", "m2"):
            section = dict(section)
            if section.get("schedule") is not None:
                section["schedule"] = tuple(
                    (int(s), float(r)) for s, r in section["schedule"]
                )
        try:
            updates[key] = replace(current, **section)
        except TypeError as exc:
            raise ValueError(f"bad configuration section {key!r}: {exc}") from exc
    cfg = replace(cfg, **updates)
    cfg.validate()
    return cfg


def config_hash(cfg: PipelineConfig) -> str:
    """Content hash over every field except the output directory."""
    doc = config_to_dict(cfg)
    doc.pop("out_dir")
    return hashlib.sha256(canonical_json(doc)).hexdigest()


def build_rrae_config(cfg: PipelineConfig, which: str):
    """Materialize one autoencoder configuration from the shared settings."""
    stage = getattr(cfg, which)
    common = {
        "scale": cfg.scale,
        "k_max": stage.k_max,
        "batch_size": stage.batch_size,
        "seed": stage.seed,
    }
    if which == "geometry":
        rc = geometry_preset(
            cfg.resolution, latent_dim=stage.latent_dim or 300, **common
        )
    elif which == "spatial":
        rc = spatial_preset(
            cfg.resolution, latent_dim=stage.latent_dim or 3000, **common
        )
    elif which in ("m1", "m2"):
        rc = curve_preset(which, **common)
        if stage.latent_dim is not None and stage.latent_dim != rc.latent_dim:
            raise ValueError(
                f"{which}: latent width is fixed at {rc.latent_dim} by its preset"
            )
    else:
        raise ValueError(f"unknown autoencoder {which!r}")
    rc = replace(rc, optimizer=stage.optimizer)
    if stage.schedule is not None:
        phases = tuple((int(s), float(r)) for s, r in stage.schedule)
        rc = replace(rc, schedule=LrSchedule(phases))
    return rc


# ---------------------------------------------------------------------------
# dataset views shared by several stages
# ---------------------------------------------------------------------------


def geometry_view(images) -> np.ndarray:
    """Image stack as float64 with an explicit channel axis: (n, 1, r, r)."""
    return np.stack([im.pixels for im in images]).astype(np.float64)[:, None]


def spatial_view(solutions) -> np.ndarray:
    """Normalized mode fields stacked per sample: (n, 3, r, r)."""
    return np.stack([spatial_channels(sol) for sol in solutions])


def curve_view(solutions, which: str) -> np.ndarray:
    """Concatenated normalized parametric curves per sample: (n, 3000)."""
    return np.stack([
        np.concatenate([curve_samples(sol, m, which) for m in (1, 2, 3)])
        for sol in solutions
    ])


# ---------------------------------------------------------------------------
# stage bodies
# ---------------------------------------------------------------------------


_STAGE_DEPS = {
    "dataset": (),
    "spgd": ("dataset",),
    "rrae_geometry": ("dataset",),
    "rrae_spatial": ("spgd",),
    "rrae_m1": ("spgd",),
    "rrae_m2": ("spgd",),
    "latent_table": (
        "dataset", "spgd", "rrae_geometry", "rrae_spatial", "rrae_m1", "rrae_m2",
    ),
    "regressors": ("latent_table",),
    "gmm": ("latent_table",),
    "bundle": (
        "dataset", "spgd", "rrae_geometry", "rrae_spatial", "rrae_m1", "rrae_m2",
        "latent_table", "regressors", "gmm",
    ),
}

STAGES = tuple(_STAGE_DEPS)


def _stage_config_dict(cfg: PipelineConfig, stage: str) -> dict:
    full = config_to_dict(cfg)
    if stage == "dataset":
        keys = ("n_train", "n_test", "resolution", "data_seed", "class_mix")
        return {key: full[key] for key in keys}
    if stage == "spgd":
        return {"oracle": full["oracle"], "spgd": full["spgd"]}
    if stage.startswith("rrae_"):
        return {"scale": full["scale"], **full[stage[len("rrae_"):]]}
    if stage == "latent_table":
        return {}
    if stage == "regressors":
        return {"seed": full["regressor_seed"], "scale": full["scale"]}
    if stage == "gmm":
        return {
            "seed": full["gmm_seed"],
            "k_min": full["gmm_k_min"],
            "k_max": full["gmm_k_max"],
        }
    if stage == "bundle":
        return {"config_hash": config_hash(cfg)}
    raise ValueError(f"unknown stage {stage!r}")


def _run_dataset(run):
    cfg = run.config
    train = generate_images(
        cfg.n_train, root_seed=cfg.data_seed,
        resolution=cfg.resolution, class_mix=cfg.class_mix,
    )
    test = generate_images(
        cfg.n_test, root_seed=cfg.data_seed + 1,
        resolution=cfg.resolution, class_mix=cfg.class_mix,
    )
    images = list(train) + list(test)
    container = images_to_container(
        images, meta={"n_train": cfg.n_train, "n_test": cfg.n_test}
    )
    return images, container


def _run_spgd(run):
    cfg = run.config
    images = run.ensure("dataset")
    grid = collocation_grid(cfg.spgd.mu1_range, cfg.spgd.mu2_range)
    solutions = []
    for img in images:
        phi = boundary_profile(img, cfg.oracle)
        samples = [
            (pt, stress_from_profile(phi, pt.mu1, pt.mu2, cfg.oracle))
            for pt in (grid.points[i] for i in grid.train_indices)
        ]
        solutions.append(fit_spgd(samples, cfg.spgd))
    # normalization envelopes come from the training split only; held-out
    # solutions reuse the same maps so every view shares one scale
    attach_normalization(solutions[: cfg.n_train])
    first = solutions[0]
    for sol in solutions[cfg.n_train:]:
        sol.curve_norm_m1 = first.curve_norm_m1
        sol.curve_norm_m2 = first.curve_norm_m2
        sol.field_norm = first.field_norm
    container = solutions_to_container(
        solutions, meta={"n_train": cfg.n_train, "n_test": cfg.n_test}
    )
    return solutions, container


def _run_rrae(run, which: str):
    cfg = run.config
    rc = build_rrae_config(cfg, which)
    if which == "geometry":
        data = geometry_view(run.ensure("dataset")[: cfg.n_train])
    else:
        sols = run.ensure("spgd")[: cfg.n_train]
        if which == "spatial":
            data = spatial_view(sols)
        else:
            data = curve_view(sols, "M1" if which == "m1" else "M2")
    model = train_rrae(data, rc)
    return model, rrae_to_container(model)


def _run_latent_table(run):
    cfg = run.config
    images = run.ensure("dataset")
    sols = run.ensure("spgd")
    models = {
        key: run.ensure(f"rrae_{key}")
        for key in ("geometry", "spatial", "m1", "m2")
    }
    views = {
        "geometry": geometry_view(images),
        "spatial": spatial_view(sols),
        "m1": curve_view(sols, "M1"),
        "m2": curve_view(sols, "M2"),
    }
    table = build_latent_table(models, views, cfg.n_train)
    return table, table_to_container(table)


def _run_regressors(run):
    table = run.ensure("latent_table")
    regs = train_regressors(
        table, seed=run.config.regressor_seed, scale=run.config.scale
    )
    return regs, regressors_to_container(regs)


def _run_gmm(run):
    cfg = run.config
    table = run.ensure("latent_table")
    gmm = fit_gmm(
        table.alpha[: cfg.n_train],
        k_candidates=range(cfg.gmm_k_min, cfg.gmm_k_max + 1),
        seed=cfg.gmm_seed,
    )
    return gmm, gmm_to_container(gmm)


def _run_bundle(run):
    cfg = run.config
    sols = run.ensure("spgd")
    table = run.ensure("latent_table")
    first = sols[0]
    bundle = ModelBundle(
        geometry=run.ensure("rrae_geometry"),
        spatial=run.ensure("rrae_spatial"),
        m1=run.ensure("rrae_m1"),
        m2=run.ensure("rrae_m2"),
        regressors=run.ensure("regressors"),
        stats=table.stats,
        gmm=run.ensure("gmm"),
        basis1=first.basis1,
        basis2=first.basis2,
        curve_norm_m1=first.curve_norm_m1,
        curve_norm_m2=first.curve_norm_m2,
        field_norm=first.field_norm,
        alpha_train=np.asarray(table.alpha[: cfg.n_train], np.float64),
        resolution=cfg.resolution,
        provenance={
            "config_hash": config_hash(cfg),
            "versions": {
                "gpdesign": __version__,
                "numpy": np.__version__,
                "container_format": CONTAINER_VERSION,
            },
        },
    )
    validate_bundle(bundle)
    return bundle, bundle_to_container(bundle)


_RUNNERS = {
    "dataset": _run_dataset,
    "spgd": _run_spgd,
    "rrae_geometry": lambda run: _run_rrae(run, "geometry"),
    "rrae_spatial": lambda run: _run_rrae(run, "spatial"),
    "rrae_m1": lambda run: _run_rrae(run, "m1"),
    "rrae_m2": lambda run: _run_rrae(run, "m2"),
    "latent_table": _run_latent_table,
    "regressors": _run_regressors,
    "gmm": _run_gmm,
    "bundle": _run_bundle,
}


def _load_product(stage: str, container: DatasetContainer):
    if stage == "dataset":
        return container_to_images(container)
    if stage == "spgd":
        return solutions_from_container(container)
    if stage.startswith("rrae_"):
        return rrae_from_container(container)
    if stage == "latent_table":
        return table_from_container(container)
    if stage == "regressors":
        return regressors_from_container(container)
    if stage == "gmm":
        return gmm_from_container(container)
    if stage == "bundle":
        return bundle_from_container(container)
    raise ValueError(f"unknown stage {stage!r}")


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class _PipelineRun:
    """One resumable pass over the stage graph for a fixed configuration."""

    def __init__(self, config: PipelineConfig, force: bool = False):
        config.validate()
        self.config = config
        self.force = force
        self.out = Path(config.out_dir)
        self.products = {}
        self.executed = []

    def artifact_path(self, stage: str) -> Path:
        name = BUNDLE_FILENAME if stage == "bundle" else f"{stage}.gpdc"
        return self.out / name

    def _stage_key(self, stage: str) -> str:
        payload = {
            "stage": stage,
            "config": _stage_config_dict(self.config, stage),
            "upstream": {
                dep: _file_hash(self.artifact_path(dep))
                for dep in _STAGE_DEPS[stage]
            },
        }
        return hashlib.sha256(canonical_json(payload)).hexdigest()

    def ensure(self, stage: str):
        if stage in self.products:
            return self.products[stage]
        for dep in _STAGE_DEPS[stage]:
            self.ensure(dep)
        path = self.artifact_path(stage)
        key = self._stage_key(stage)
        if not self.force and path.exists():
            try:
                container = read_dataset(path)
            except ContainerFormatError:
                container = None
            if container is not None and container.meta.get("stage_key") == key:
                product = _load_product(stage, container)
                self.products[stage] = product
                return product
        started = time.perf_counter()
        try:
            product, container = _RUNNERS[stage](self)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(stage, f"{exc} (artifact {path})") from exc
        container.meta["stage"] = stage
        container.meta["stage_key"] = key
        write_dataset(container, path)
        self._record_timing(stage, time.perf_counter() - started)
        self.products[stage] = product
        return product

    def _record_timing(self, stage: str, seconds: float):
        self.executed.append(stage)
        timings_path = self.out / "timings.json"
        timings = {}
        if timings_path.exists():
            try:
                timings = json.loads(timings_path.read_text())
            except (OSError, json.JSONDecodeError):
                timings = {}
        timings[stage] = round(seconds, 3)
        timings_path.write_text(json.dumps(timings, indent=2, sort_keys=True))


def run_stage(config: PipelineConfig, stage: str, *, force: bool = False):
    """Run one stage (and any stale upstream stages); returns its product."""
    if stage not in _STAGE_DEPS:
        raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES}")
    return _PipelineRun(config, force).ensure(stage)


def run_training_pipeline(config: PipelineConfig, *, force: bool = False):
    """Execute every stage in order and return the assembled ModelBundle."""
    return _PipelineRun(config, force).ensure("bundle")


# ---------------------------------------------------------------------------
# the bundle
# ---------------------------------------------------------------------------


@dataclass
class ModelBundle:
    """Everything the online workflows need, persisted as one container."""

    geometry: TrainedRRAE
    spatial: TrainedRRAE
    m1: TrainedRRAE
    m2: TrainedRRAE
    regressors: RegressorSet
    stats: TableStats
    gmm: GmmModel
    basis1: object
    basis2: object
    curve_norm_m1: tuple
    curve_norm_m2: tuple
    field_norm: tuple
    alpha_train: np.ndarray
    resolution: int
    provenance: dict = field(default_factory=dict)


def validate_bundle(bundle: ModelBundle) -> None:
    """Check that the persisted components agree on every latent width."""
    k_geo = bundle.geometry.config.k_max
    widths = {
        "spatial": bundle.spatial.config.k_max,
        "m1": bundle.m1.config.k_max,
        "m2": bundle.m2.config.k_max,
    }
    if bundle.alpha_train.ndim != 2 or bundle.alpha_train.shape[1] != k_geo:
        raise ConsistencyError(
            f"alpha_train width {bundle.alpha_train.shape[-1]} does not match "
            f"geometry k_max {k_geo}"
        )
    if bundle.gmm.means.shape[1] != k_geo:
        raise ConsistencyError(
            f"density model dimension {bundle.gmm.means.shape[1]} does not "
            f"match geometry k_max {k_geo}"
        )
    for block, width in (
        ("alpha", k_geo),
        ("gamma_x", widths["spatial"]),
        ("gamma_1", widths["m1"]),
        ("gamma_2", widths["m2"]),
    ):
        got = int(np.asarray(bundle.stats.mean[block]).shape[0])
        if got != width:
            raise ConsistencyError(
                f"latent statistics for {block} have width {got}, expected {width}"
            )
    for key, out_width in (
        ("gamma_x", widths["spatial"]),
        ("gamma_1", widths["m1"]),
        ("gamma_2", widths["m2"]),
    ):
        spec = bundle.regressors.specs[key]
        if spec.layers[0].in_dim != k_geo:
            raise ConsistencyError(
                f"regressor {key} expects input width {spec.layers[0].in_dim}, "
                f"geometry k_max is {k_geo}"
            )
        if spec.layers[-1].out_dim != out_width:
            raise ConsistencyError(
                f"regressor {key} produces width {spec.layers[-1].out_dim}, "
                f"decoder expects {out_width}"
            )
    res = bundle.resolution
    if tuple(bundle.geometry.config.input_shape) != (1, res, res):
        raise ConsistencyError(
            f"geometry autoencoder shape {bundle.geometry.config.input_shape} "
            f"does not match resolution {res}"
        )
    if tuple(bundle.spatial.config.input_shape) != (3, res, res):
        raise ConsistencyError(
            f"spatial autoencoder shape {bundle.spatial.config.input_shape} "
            f"does not match resolution {res}"
        )
    expected_width = N_STORED_MODES * N_CURVE_POINTS
    for name, model in (("m1", bundle.m1), ("m2", bundle.m2)):
        if tuple(model.config.input_shape) != (expected_width,):
            raise ConsistencyError(
                f"curve autoencoder {name} shape {model.config.input_shape} "
                f"does not match {expected_width} samples"
            )
    for name, maps in (
        ("curve_norm_m1", bundle.curve_norm_m1),
        ("curve_norm_m2", bundle.curve_norm_m2),
        ("field_norm", bundle.field_norm),
    ):
        if len(maps) != N_STORED_MODES:
            raise ConsistencyError(
                f"{name} holds {len(maps)} maps, expected {N_STORED_MODES}"
            )


def _basis_meta(bundle: ModelBundle) -> dict:
    return {
        "kind": bundle.basis1.kind,
        "d_s": len(bundle.basis1.centers),
        "mu1_range": [bundle.basis1.lo, bundle.basis1.hi],
        "mu2_range": [bundle.basis2.lo, bundle.basis2.hi],
        "corr_len1": bundle.basis1.corr_len,
        "corr_len2": bundle.basis2.corr_len,
    }


def _maps_rows(maps) -> np.ndarray:
    return np.array([[m.offset, m.scale] for m in maps], np.float64)


def _maps_from_rows(rows) -> tuple:
    return tuple(AffineMap(offset=float(o), scale=float(s)) for o, s in rows)


def gmm_to_container(gmm: GmmModel) -> DatasetContainer:
    c = DatasetContainer(meta={
        "kind": "gmm",
        "n_components": int(gmm.n_components),
        "log_likelihood": float(gmm.log_likelihood),
        "bic": float(gmm.bic),
        "ridge": float(gmm.ridge),
    })
    c.add("weights", np.asarray(gmm.weights, np.float64))
    c.add("means", np.asarray(gmm.means, np.float64))
    c.add("covariances", np.asarray(gmm.covariances, np.float64))
    ks = sorted(gmm.bic_by_k)
    c.add("bic_ks", np.asarray(ks, np.int64))
    c.add("bic_values", np.asarray([gmm.bic_by_k[k] for k in ks], np.float64))
    return c


def gmm_from_container(c: DatasetContainer) -> GmmModel:
    if c.meta.get("kind") != "gmm":
        raise ContainerFormatError("container does not hold a density model")
    bic_by_k = {
        int(k): float(v)
        for k, v in zip(c.arrays["bic_ks"], c.arrays["bic_values"])
    }
    return GmmModel(
        int(c.meta["n_components"]),
        np.asarray(c.arrays["weights"], np.float64),
        np.asarray(c.arrays["means"], np.float64),
        np.asarray(c.arrays["covariances"], np.float64),
        float(c.meta["log_likelihood"]),
        float(c.meta["bic"]),
        bic_by_k,
        float(c.meta["ridge"]),
    )


_BUNDLE_MODELS = ("geometry", "spatial", "m1", "m2")


def bundle_to_container(bundle: ModelBundle) -> DatasetContainer:
    c = DatasetContainer(meta={
        "kind": "model_bundle",
        "resolution": int(bundle.resolution),
        "provenance": dict(bundle.provenance),
        "basis": _basis_meta(bundle),
        "stats": {"fit_source": bundle.stats.fit_source},
    })
    for name in _BUNDLE_MODELS:
        sub = rrae_to_container(getattr(bundle, name))
        for arr_name, arr in sub.arrays.items():
            c.add(f"{name}.{arr_name}", arr)
        c.meta[name] = sub.meta
    sub = regressors_to_container(bundle.regressors)
    for arr_name, arr in sub.arrays.items():
        c.add(f"regressors.{arr_name}", arr)
    c.meta["regressors"] = sub.meta
    sub = gmm_to_container(bundle.gmm)
    for arr_name, arr in sub.arrays.items():
        c.add(f"gmm.{arr_name}", arr)
    c.meta["gmm"] = sub.meta
    for key in BLOCKS:
        c.add(f"stats.{key}_mean", np.asarray(bundle.stats.mean[key], np.float64))
        c.add(f"stats.{key}_std", np.asarray(bundle.stats.std[key], np.float64))
    c.add("norm.curve_m1", _maps_rows(bundle.curve_norm_m1))
    c.add("norm.curve_m2", _maps_rows(bundle.curve_norm_m2))
    c.add("norm.field", _maps_rows(bundle.field_norm))
    c.add("alpha_train", np.asarray(bundle.alpha_train, np.float64))
    return c


def _sub_container(c: DatasetContainer, prefix: str) -> DatasetContainer:
    meta = c.meta.get(prefix)
    if meta is None:
        raise ContainerFormatError(f"bundle missing {prefix} component")
    prefix_dot = prefix + "."
    arrays = {
        name[len(prefix_dot):]: arr
        for name, arr in c.arrays.items()
        if name.startswith(prefix_dot)
    }
    if not arrays:
        raise ContainerFormatError(f"bundle missing {prefix} arrays")
    return DatasetContainer(arrays=arrays, meta=meta)


def bundle_from_container(c: DatasetContainer) -> ModelBundle:
    if c.meta.get("kind") != "model_bundle":
        raise ContainerFormatError("container does not hold a model bundle")
    try:
        models = {
            name: rrae_from_container(_sub_container(c, name))
            for name in _BUNDLE_MODELS
        }
        regressors = regressors_from_container(_sub_container(c, "regressors"))
        gmm = gmm_from_container(_sub_container(c, "gmm"))
        b = c.meta["basis"]
        mean = {key: np.asarray(c.arrays[f"stats.{key}_mean"], np.float64)
                for key in BLOCKS}
        std = {key: np.asarray(c.arrays[f"stats.{key}_std"], np.float64)
               for key in BLOCKS}
        stats = TableStats(mean, std, c.meta["stats"]["fit_source"])
        curve_norm_m1 = _maps_from_rows(c.arrays["norm.curve_m1"])
        curve_norm_m2 = _maps_from_rows(c.arrays["norm.curve_m2"])
        field_norm = _maps_from_rows(c.arrays["norm.field"])
        alpha_train = np.asarray(c.arrays["alpha_train"], np.float64)
        resolution = int(c.meta["resolution"])
        provenance = dict(c.meta.get("provenance", {}))
    except KeyError as exc:
        raise ContainerFormatError(f"bundle missing entry {exc}") from exc
    except ValueError as exc:
        raise ContainerFormatError(f"bundle component unreadable: {exc}") from exc
    basis1 = make_basis(*b["mu1_range"], b["d_s"], b["kind"])
    basis2 = make_basis(*b["mu2_range"], b["d_s"], b["kind"])
    if b["kind"] == "gaussian_kriging":
        basis1 = replace(basis1, corr_len=b["corr_len1"])
        basis2 = replace(basis2, corr_len=b["corr_len2"])
    bundle = ModelBundle(
        geometry=models["geometry"],
        spatial=models["spatial"],
        m1=models["m1"],
        m2=models["m2"],
        regressors=regressors,
        stats=stats,
        gmm=gmm,
        basis1=basis1,
        basis2=basis2,
        curve_norm_m1=curve_norm_m1,
        curve_norm_m2=curve_norm_m2,
        field_norm=field_norm,
        alpha_train=alpha_train,
        resolution=resolution,
        provenance=provenance,
    )
    validate_bundle(bundle)
    return bundle


def save_bundle(bundle: ModelBundle, path) -> None:
    validate_bundle(bundle)
    write_dataset(bundle_to_container(bundle), path)


def load_bundle(path) -> ModelBundle:
    return bundle_from_container(read_dataset(path))


# ---------------------------------------------------------------------------
# online workflows
# ---------------------------------------------------------------------------


def reconstruct_for_geometry(bundle: ModelBundle, image: RVEImage) -> SeparatedSolution:
    """Workflow (i): geometry in, separated parametric solution out."""
    if image.resolution != bundle.resolution:
        raise ValueError(
            f"image resolution {image.resolution} does not match bundle "
            f"resolution {bundle.resolution}"
        )
    alpha = encode(bundle.geometry, np.asarray(image.pixels, np.float64)[None])
    return assemble_from_alpha(bundle, alpha)


def assemble_from_alpha(bundle: ModelBundle, alpha) -> SeparatedSolution:
    """Decode a geometry code into a full separated solution.

    The three regressed coefficient vectors drive the spatial and curve
    decoders; decoded values are mapped back through the dataset-global
    envelopes, and the curves are projected onto the parametric bases.
    """
    gamma_x, gamma_1, gamma_2 = predict_gammas(bundle.regressors, bundle.stats, alpha)
    fields = decode(bundle.spatial, gamma_x)
    curves1 = decode(bundle.m1, gamma_1).reshape(N_STORED_MODES, -1)
    curves2 = decode(bundle.m2, gamma_2).reshape(N_STORED_MODES, -1)
    modes = []
    for i in range(N_STORED_MODES):
        f = bundle.field_norm[i].inverse(fields[i])
        lam1 = curve_to_lambda(
            bundle.basis1, bundle.curve_norm_m1[i].inverse(curves1[i])
        )
        lam2 = curve_to_lambda(
            bundle.basis2, bundle.curve_norm_m2[i].inverse(curves2[i])
        )
        modes.append(SpgdMode(f=f, lambda1=lam1, lambda2=lam2))
    return SeparatedSolution(
        modes=modes,
        basis1=bundle.basis1,
        basis2=bundle.basis2,
        resolution=bundle.resolution,
        curve_norm_m1=bundle.curve_norm_m1,
        curve_norm_m2=bundle.curve_norm_m2,
        field_norm=bundle.field_norm,
    )


def generate_designs(bundle: ModelBundle, n: int, seed: int = 0):
    """Workflow (ii): sample new designs from the latent density model.

    Returns a list of (alpha, thresholded mask, SeparatedSolution) triples,
    deterministic for a fixed seed.
    """
    if n < 1:
        raise ValueError(f"need at least one design, got n={n}")
    alphas = sample_latents(bundle.gmm, n, seed)
    designs = []
    for alpha in alphas:
        mask = decode(bundle.geometry, alpha, threshold=True)[0]
        designs.append((alpha, mask, assemble_from_alpha(bundle, alpha)))
    return designs


# ---------------------------------------------------------------------------
# evaluation summary
# ---------------------------------------------------------------------------


def evaluate_run(config: PipelineConfig, *, force: bool = False) -> dict:
    """Headline metrics for a finished (or resumable) pipeline run."""
    run = _PipelineRun(config, force)
    bundle = run.ensure("bundle")
    images = run.ensure("dataset")
    sols = run.ensure("spgd")
    table = run.ensure("latent_table")
    n_train = config.n_train

    views = {
        "geometry": geometry_view(images),
        "spatial": spatial_view(sols),
        "m1": curve_view(sols, "M1"),
        "m2": curve_view(sols, "M2"),
    }
    autoencoders = {}
    for name in _BUNDLE_MODELS:
        model = getattr(bundle, name)
        autoencoders[name] = {
            "train_loss_percent": reconstruction_loss(model, views[name][:n_train]),
            "test_loss_percent": reconstruction_loss(model, views[name][n_train:]),
        }

    grid = collocation_grid(config.spgd.mu1_range, config.spgd.mu2_range)
    probe = range(min(8, n_train))
    train_mapes, test_mapes = [], []
    for idx in probe:
        phi = boundary_profile(images[idx], config.oracle)
        def fields_at(indices):
            return [
                (pt, stress_from_profile(phi, pt.mu1, pt.mu2, config.oracle))
                for pt in (grid.points[i] for i in indices)
            ]
        train_mapes.append(mape(sols[idx], fields_at(grid.train_indices)))
        test_mapes.append(mape(sols[idx], fields_at(grid.test_indices)))

    designs = generate_designs(bundle, 50, seed=1234)
    gen_masks = [mask for _, mask, _ in designs]
    train_masks = [im.pixels for im in images[:n_train]]
    alphas = np.stack([alpha for alpha, _, _ in designs])

    return {
        "autoencoders": autoencoders,
        "surrogate": {
            "samples": len(list(probe)),
            "train_mape_percent": float(np.mean(train_mapes)),
            "test_mape_percent": float(np.mean(test_mapes)),
        },
        "regressors": {
            key: float(val) for key, val in bundle.regressors.train_mae.items()
        },
        "density_model": {
            "n_components": int(bundle.gmm.n_components),
            "bic": float(bundle.gmm.bic),
        },
        "generation": {
            "descriptor_distance_to_train": descriptor_distance(
                gen_masks, train_masks
            ),
            "latent_bounds_fraction": bounds_report(alphas, bundle.alpha_train),
        },
        "provenance": dict(bundle.provenance),
    }
