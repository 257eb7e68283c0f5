"""Run configuration read from TOML.

Schema (every key optional, defaults shown)::

    epsilon = 0.1
    kappa0 = 1.0
    kappa1 = 1.0
    eta0 = 1.5
    eta1 = 1.3333333333333333   # default: 2/3 for eta0 = 1, (4 eta0 - 2)/3 otherwise
    r_over_delta_max = 2.0
    omega = [0.0, 1.0]
    L = 1.0

    [bulk]                      # young/poisson or lambda/mu
    young = 2e11
    poisson = 0.3

    [beam]
    young = 2e11
    poisson = 0.3

    [load]
    bulk = [1e3, 1e3]
    beam = [0.0, 0.0]

    [mesh]
    n_beam_x = 4
    n_beam_y = 8
    hmax = 0.05
    grade = 1.5
    width_factor = 2.0
    clamp = "bottom"            # bottom | bottom+sides (lateral sides of the lower block too)

    [solver]
    tol = 1e-9
    method = "auto"             # auto | direct | cg

    [study]
    eps_list = [0.1, 0.05, 0.02]
    springs = ["paper", "2d"]
    refinement_check = true
    refine_factor = 2.0
    allow_small_eps = false
    max_dofs = 2_000_000
"""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .fem2d.mesh import MeshResolution
from .scaling import Domain, LayerScaling, LoadSpec, MaterialParams, derive_geometry

SMALLEST_DEFAULT_EPS = 0.02
SPRINGS = ("paper", "2d")


class ConfigError(ValueError):
    pass


@dataclass
class StudyConfig:
    eps_list: list = field(default_factory=lambda: [0.1, 0.05, 0.02])
    springs: list = field(default_factory=lambda: list(SPRINGS))
    refinement_check: bool = True
    refine_factor: float = 2.0
    allow_small_eps: bool = False
    max_dofs: int = 2_000_000


@dataclass
class RunConfig:
    epsilon: float = 0.1
    kappa0: float = 1.0
    kappa1: float = 1.0
    eta0: float = 1.5
    eta1: float | None = None
    r_over_delta_max: float = 2.0
    omega: tuple = (0.0, 1.0)
    L: float = 1.0
    bulk: dict = field(default_factory=lambda: {"young": 2e11, "poisson": 0.3})
    beam: dict = field(default_factory=lambda: {"young": 2e11, "poisson": 0.3})
    load: dict = field(default_factory=lambda: {"bulk": [1e3, 1e3], "beam": [0.0, 0.0]})
    mesh: dict = field(default_factory=dict)
    solver: dict = field(default_factory=lambda: {"tol": 1e-9, "method": "auto"})
    study: StudyConfig = field(default_factory=StudyConfig)

    # -- derived objects -------------------------------------------------
    @property
    def eta1_value(self) -> float:
        if self.eta1 is not None:
            return float(self.eta1)
        if abs(self.eta0 - 1.0) < 1e-12:
            return 2.0 / 3.0
        return (4 * self.eta0 - 2) / 3

    def scaling(self, epsilon: float | None = None) -> LayerScaling:
        eps = self.epsilon if epsilon is None else epsilon
        return derive_geometry(eps, self.kappa0, self.kappa1, self.eta0, self.eta1_value,
                               self.r_over_delta_max)

    @property
    def domain(self) -> Domain:
        return Domain((tuple(self.omega),), self.L)

    @property
    def mat_bulk(self) -> MaterialParams:
        return _material(self.bulk, "bulk")

    @property
    def mat_beam(self) -> MaterialParams:
        return _material(self.beam, "beam")

    @property
    def load_spec(self) -> LoadSpec:
        return LoadSpec.constant(self.load.get("bulk", [1e3, 1e3]), self.load.get("beam", [0.0, 0.0]))

    def resolution(self, scale: float = 1.0) -> MeshResolution:
        res = MeshResolution(**self.mesh)
        return res if scale == 1.0 else res.scaled(scale)

    @property
    def tol(self) -> float:
        return float(self.solver.get("tol", 1e-9))

    @property
    def method(self) -> str:
        return str(self.solver.get("method", "auto"))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["omega"] = list(self.omega)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=float).encode()
        return hashlib.sha256(blob).hexdigest()


def _material(block: dict, name: str) -> MaterialParams:
    keys = set(block)
    try:
        if {"young", "poisson"} <= keys:
            return MaterialParams.from_young_poisson(float(block["young"]), float(block["poisson"]))
        if {"lambda", "mu"} <= keys:
            return MaterialParams(float(block["lambda"]), float(block["mu"]))
    except ValueError as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc
    raise ConfigError(f"[{name}] needs young/poisson or lambda/mu")


_TOP = {"epsilon", "kappa0", "kappa1", "eta0", "eta1", "r_over_delta_max", "omega", "L",
        "bulk", "beam", "load", "mesh", "solver", "study"}
_MESH = {"n_beam_x", "n_beam_y", "hmax", "grade", "width_factor", "clamp"}
_STUDY = set(StudyConfig.__dataclass_fields__)


def from_dict(data: dict) -> RunConfig:
    unknown = set(data) - _TOP
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    data = dict(data)
    study = data.pop("study", {}) or {}
    bad = set(study) - _STUDY
    if bad:
        raise ConfigError(f"unknown [study] keys: {sorted(bad)}")
    bad = set(data.get("mesh", {})) - _MESH
    if bad:
        raise ConfigError(f"unknown [mesh] keys: {sorted(bad)}")
    if "omega" in data:
        om = data["omega"]
        if len(om) != 2 or not float(om[1]) > float(om[0]):
            raise ConfigError("omega must be [lo, hi] with lo < hi")
        data["omega"] = (float(om[0]), float(om[1]))
    cfg = RunConfig(**data, study=StudyConfig(**study))
    for spring in cfg.study.springs:
        if spring not in SPRINGS:
            raise ConfigError(f"spring variant must be one of {SPRINGS}, got {spring!r}")
    if not cfg.study.eps_list:
        raise ConfigError("empty eps_list")
    # validate eagerly so that input errors surface before any solve
    try:
        cfg.scaling()
        cfg.mat_bulk, cfg.mat_beam, cfg.load_spec, cfg.domain
        cfg.resolution()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(data)
