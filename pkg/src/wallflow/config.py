"""Run configuration: strict schema, presets, and YAML round-tripping.

Configs are nested dataclasses; loading rejects unknown keys so typos fail
loudly. Every run writes its fully resolved configuration next to its
outputs, and rerunning from that file with the same seeds reproduces the
outputs bitwise (single-threaded).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

import yaml

from .dns import ChannelEnv, EnvConfig
from .grid import build_grid, fit_stretching
from .models import ModelConfig


class ConfigError(ValueError):
    pass


# Grid presets: re_b -> (nx, ny, nz) for each domain flavor.
MINIMAL_GRIDS = {
    3000: (32, 130, 32),
    6000: (64, 260, 64),
    9000: (96, 390, 96),
    12000: (160, 520, 160),
    15000: (192, 650, 192),
}
FULL_GRIDS = {
    3000: (128, 130, 128),
    6000: (256, 260, 256),
    9000: (384, 390, 384),
    12000: (512, 520, 512),
    15000: (640, 650, 640),
}
MINIMAL_EXTENTS = (1.77, 0.89)
FULL_EXTENTS = (6.283185307179586, 3.141592653589793)
TARGET_MAX_DY_PLUS = 7.6


def nominal_re_tau(re_b: float) -> float:
    return 178.0 * (re_b / 3000.0) ** 0.88


@dataclass
class EnvSection:
    re_b: float = 3000.0
    domain: str = "minimal"  # minimal | full
    nx: int | None = None
    ny: int | None = None
    nz: int | None = None
    lx: float | None = None
    lz: float | None = None
    gamma_s: float | None = None
    cfl: float = 0.5
    dt_max: float = 0.01
    init: str = "perturbed"
    perturbation_rms: float = 0.10
    restart: str | None = None


@dataclass
class ControllerSection:
    kind: str = "none"  # none | opposition | policy
    detection_y_plus: float = 10.0
    gain: float = 1.0
    clamp: float = 0.3
    checkpoint: str | None = None


@dataclass
class ModelSection:
    width2d: int = 12
    modes2d: list = field(default_factory=lambda: [8, 8])
    enc_blocks: int = 2
    dec_blocks: int = 2
    mfn_layers: int = 3
    use_mfn: bool = True
    width3d: int = 6
    modes3d: list = field(default_factory=lambda: [6, 6, 6])
    head_blocks: int = 1
    n_pos: int = 8
    observer_inputs: str = "both"

    def to_model_config(self) -> ModelConfig:
        return ModelConfig(
            width2d=self.width2d, modes2d=tuple(self.modes2d),
            enc_blocks=self.enc_blocks, dec_blocks=self.dec_blocks,
            mfn_layers=self.mfn_layers, use_mfn=self.use_mfn,
            width3d=self.width3d, modes3d=tuple(self.modes3d),
            head_blocks=self.head_blocks, n_pos=self.n_pos,
            observer_inputs=self.observer_inputs)


@dataclass
class ScheduleSection:
    episodes: int = 5
    steps_per_episode: int = 2000
    epochs_per_episode: int = 50
    batch: int = 16
    action_interval: int = 1
    exploration: bool = True
    sigma0: float = 0.05
    noise_snr_inv: float = 0.0
    use_pde_loss: bool = True
    w_pde: float = 1.0
    use_policy_tke: bool = True
    lam_n: float = 0.5
    lr: float = 1e-3
    clamp: float = 0.3
    obs_stride: int = 4
    obs_stride_xz: int = 2
    buffer_capacity: int = 2048


@dataclass
class DatasetSection:
    re_list: list = field(default_factory=lambda: [3000])
    n_train: int = 700
    n_val: int = 100
    n_test: int = 100
    stride_steps: int = 50
    detection_y_plus: float = 10.0
    obs_stride: int = 4
    obs_stride_xz: int = 2
    include_pde_fields: bool = True


@dataclass
class SupervisedSection:
    corpus: str = ""
    train_re: list = field(default_factory=lambda: [3000])
    test_re: list = field(default_factory=lambda: [3000])
    epochs: int = 300
    batch: int = 16
    lr: float = 1e-3
    use_pde_loss: bool = True
    w_pde: float = 1.0


@dataclass
class RunConfig:
    mode: str = "simulate"
    out_dir: str = "runs/out"
    seeds: list = field(default_factory=lambda: [0])
    flow_throughs: float = 10.0
    warmup_flow_throughs: float = 25.0
    warm_start: str | None = None
    stats_every: int = 1
    snapshot_every: int = 0
    env: EnvSection = field(default_factory=EnvSection)
    controller: ControllerSection = field(default_factory=ControllerSection)
    model: ModelSection = field(default_factory=ModelSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    dataset: DatasetSection = field(default_factory=DatasetSection)
    supervised: SupervisedSection = field(default_factory=SupervisedSection)

    VALID_MODES = ("simulate", "train", "evaluate", "dataset", "supervised",
                   "export-plots-data")

    def validate(self):
        if self.mode not in self.VALID_MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {self.VALID_MODES}")
        if self.env.domain not in ("minimal", "full"):
            raise ConfigError(f"unknown domain {self.env.domain!r}")
        if self.controller.kind not in ("none", "opposition", "policy"):
            raise ConfigError(f"unknown controller {self.controller.kind!r}")
        if not self.seeds:
            raise ConfigError("seeds must be a non-empty list")


def _from_dict(cls, data: dict, path: str = ""):
    if not isinstance(data, dict):
        raise ConfigError(f"expected a mapping at {path or 'top level'}, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown config key(s) {sorted(unknown)} at {path or 'top level'}")
    kwargs = {}
    for name, val in data.items():
        f = known[name]
        sub = f"{path}.{name}" if path else name
        if dataclasses.is_dataclass(f.type) or (isinstance(f.default_factory, type)
                                                and dataclasses.is_dataclass(f.default_factory)):
            kwargs[name] = _from_dict(f.default_factory, val, sub)
        elif isinstance(val, dict):
            factory = f.default_factory if f.default_factory is not dataclasses.MISSING else None
            if factory is None or not dataclasses.is_dataclass(factory):
                raise ConfigError(f"unexpected mapping at {sub}")
            kwargs[name] = _from_dict(factory, val, sub)
        else:
            kwargs[name] = val
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    cfg = _from_dict(RunConfig, data)
    cfg.validate()
    return cfg


def config_to_dict(cfg) -> dict:
    return dataclasses.asdict(cfg)


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    return config_from_dict(data)


def save_config(cfg: RunConfig, path: str):
    with open(path, "w") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=False)


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply 'dotted.path=value' strings onto a raw config mapping."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, raw = item.partition("=")
        val = yaml.safe_load(raw)
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot descend into {part!r} in override {item!r}")
        node[parts[-1]] = val
    return data


def resolve_grid(env: EnvSection):
    """Grid counts/extents from the presets, with explicit overrides."""
    table = MINIMAL_GRIDS if env.domain == "minimal" else FULL_GRIDS
    key = int(round(env.re_b))
    preset = table.get(key)
    nx = env.nx if env.nx is not None else (preset[0] if preset else None)
    ny = env.ny if env.ny is not None else (preset[1] if preset else None)
    nz = env.nz if env.nz is not None else (preset[2] if preset else None)
    if nx is None or ny is None or nz is None:
        raise ConfigError(
            f"no grid preset for re_b={env.re_b} ({env.domain}); set nx/ny/nz explicitly")
    lx0, lz0 = MINIMAL_EXTENTS if env.domain == "minimal" else FULL_EXTENTS
    lx = env.lx if env.lx is not None else lx0
    lz = env.lz if env.lz is not None else lz0
    if env.gamma_s is not None:
        gamma = env.gamma_s
    else:
        gamma = fit_stretching(ny, nominal_re_tau(env.re_b), TARGET_MAX_DY_PLUS)
    return build_grid(nx, ny, nz, lx, lz, gamma)


def build_env(env: EnvSection, seed: int | None = None) -> ChannelEnv:
    grid = resolve_grid(env)
    return ChannelEnv(EnvConfig(
        re_b=env.re_b, grid=grid, cfl=env.cfl, dt_max=env.dt_max,
        init=env.init, seed=seed, perturbation_rms=env.perturbation_rms))
