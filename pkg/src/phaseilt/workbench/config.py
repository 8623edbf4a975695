"""Experiment configuration as nested dataclasses with strict JSON I/O.

Every section is a frozen dataclass; :func:`load_config` rejects unknown
keys at every level and :func:`dump_config` writes all keys, so a
configuration round-trips losslessly.  The defaults reproduce the common
setup of the reference experiments (193 nm, NA 1, coherency 0.067, a
128 x 128 grid of 12.5 nm pixels, ten SOCS modes and a threshold at 40%
of the target's peak intensity).
"""

from dataclasses import asdict, dataclass, field, fields, is_dataclass
import json
import os

from ..errors import ValidationError
from ..functionals import FunctionalConfig, RegProfile
from ..optics import GridSpec, OpticalSystem
from ..optimizer import Schedule


@dataclass(frozen=True)
class OpticsSection:
    lambda_nm: float = 193.0
    na: float = 1.0
    sigma_c: float = 0.067

    def build(self):
        return OpticalSystem(self.lambda_nm, self.na, self.sigma_c)


@dataclass(frozen=True)
class GridSection:
    n: int = 128
    dx_nm: float = 12.5

    def build(self):
        return GridSpec(self.n, self.dx_nm)


@dataclass(frozen=True)
class SocsSection:
    n0: int = 10
    method: str = "auto"
    cache_dir: str = None

    def __post_init__(self):
        if self.method not in ("auto", "dense", "iterative"):
            raise ValidationError(f"unknown eigensolver {self.method!r}")
        if self.n0 < 1:
            raise ValidationError("n0 must be >= 1")


@dataclass(frozen=True)
class FunctionalSection:
    """``a`` weights the perimeter mismatch, ``b`` Modica-Mortola, ``c`` the regularizer."""

    a: float = 0.0
    b: float = 2e-4
    c: float = 0.0
    p: int = 2
    mm_exponent: float = 2.0
    d_hard: float = 0.05
    d_soft: float = 0.07
    alpha: float = 1.0
    smooth_abs_mu: float = None
    threshold_fraction: float = 0.4

    def __post_init__(self):
        if not 0 < self.threshold_fraction <= 1:
            raise ValidationError("threshold_fraction must lie in (0, 1]")

    def build(self):
        prof = RegProfile.from_band(self.d_hard, self.d_soft, self.alpha)
        return FunctionalConfig(weight_perim_diff=self.a, weight_mm=self.b, weight_reg=self.c,
                                misfit_exponent=self.p, mm_exponent=self.mm_exponent,
                                reg_profile=prof, smooth_abs_mu=self.smooth_abs_mu)


@dataclass(frozen=True)
class ScheduleSection:
    eps0: float = 0.002
    eta0: float = 0.2
    gamma0: float = 0.03
    rate_eps: float = 1.2
    rate_eta: float = 1.2
    rate_gamma: float = 1.05
    iters_per_stage: int = 60
    total_iters: int = 1080

    def build(self):
        return Schedule(**asdict(self))


@dataclass(frozen=True)
class TargetSpec:
    kind: str = "target1_like"
    rects: tuple = ()

    def __post_init__(self):
        if self.kind not in ("target1_like", "target2_like", "custom_rects"):
            raise ValidationError(f"unknown target kind {self.kind!r}")
        object.__setattr__(self, "rects", tuple(tuple(int(v) for v in r) for r in self.rects))
        if any(len(r) != 4 for r in self.rects):
            raise ValidationError("rectangles are (i0, i1, j0, j1)")


@dataclass(frozen=True)
class InitialGuessSpec:
    """``noise`` adds seeded uniform noise of that amplitude before clipping."""

    kind: str = "diffuse"
    level: float = 0.7
    amplitude: float = 0.25
    period_px: float = None
    blur_px: float = 2.0
    noise: float = 0.0

    def __post_init__(self):
        if self.kind not in ("diffuse", "perturbed_target"):
            raise ValidationError(f"unknown initial guess kind {self.kind!r}")
        if self.noise < 0:
            raise ValidationError("noise must be >= 0")


@dataclass(frozen=True)
class RunSection:
    target: TargetSpec = field(default_factory=TargetSpec)
    initial_guess: InitialGuessSpec = field(default_factory=InitialGuessSpec)
    support_radius_px: float = None
    hvar_list: tuple = (-0.5, 0.0, 0.5, 2.5, 3.5)
    seed: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        object.__setattr__(self, "hvar_list", tuple(float(v) for v in self.hvar_list))


@dataclass(frozen=True)
class ExperimentConfig:
    optics: OpticsSection = field(default_factory=OpticsSection)
    grid: GridSection = field(default_factory=GridSection)
    socs: SocsSection = field(default_factory=SocsSection)
    functional: FunctionalSection = field(default_factory=FunctionalSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    run: RunSection = field(default_factory=RunSection)

    def to_dict(self):
        return _to_plain(self)

    @classmethod
    def from_dict(cls, data):
        return _from_plain(cls, data, "config")

    def replace(self, **sections):
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(sections)
        return ExperimentConfig(**kw)


def _to_plain(obj):
    if is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, tuple):
        return [_to_plain(v) for v in obj]
    return obj


_NUMERIC = {"float": (int, float), "int": (int,)}


def _from_plain(cls, data, where):
    if not isinstance(data, dict):
        raise ValidationError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ValidationError(f"{where}: unknown keys {unknown}")
    kw = {}
    for name, value in data.items():
        f = known[name]
        default = f.default_factory() if callable(f.default_factory) else f.default
        if is_dataclass(default):
            kw[name] = _from_plain(type(default), value, f"{where}.{name}")
            continue
        tname = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", "")
        if value is not None and tname in _NUMERIC:
            if isinstance(value, bool) or not isinstance(value, _NUMERIC[tname]):
                raise ValidationError(f"{where}.{name}: expected {tname}, got {value!r}")
        if tname == "tuple" and not isinstance(value, (list, tuple)):
            raise ValidationError(f"{where}.{name}: expected a list")
        kw[name] = value
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def dumps_config(cfg):
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=False) + "\n"


def loads_config(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from exc
    return ExperimentConfig.from_dict(data)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return loads_config(fh.read())


def dump_config(cfg, path):
    from .fieldio import atomic_write_text
    atomic_write_text(path, dumps_config(cfg))


def desk_config(**run_kw):
    """The 64 x 64 desk-scale setup: same 1600 nm window at 25 nm pixels."""
    cfg = ExperimentConfig(grid=GridSection(64, 25.0))
    if run_kw:
        cfg = cfg.replace(run=RunSection(**run_kw))
    return cfg


def cache_dir_for(cfg):
    """Configured SOCS cache directory, overridden by ``PHASEILT_CACHE``."""
    return os.environ.get("PHASEILT_CACHE") or cfg.socs.cache_dir
