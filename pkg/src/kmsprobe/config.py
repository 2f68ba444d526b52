"""Scenario files: TOML with one section per pipeline stage.

Parsing never computes anything; `validate` collects every problem with its
field path so a bad scenario is rejected before any work starts.
"""

from dataclasses import asdict, dataclass, field, fields, replace
import hashlib
import math
from pathlib import Path

import tomli
import tomli_w

from .correlators import CATALOG, COUPLINGS, OPERATORS
from .detector import MU_PRESETS
from .errors import PreconditionError

SHAPES = ("gaussian", "bump")
ROUTES = ("fourier", "direct")
SPECTRA = ("auto", "closed", "damped")
PROFILES = ("point", "gaussian")
UNITS = ("natural", "SI")
VERDICTS = ("converged", "divergent")


class ConfigError(PreconditionError):
    """Scenario validation failure; `problems` lists (field path, message)."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.problems))


@dataclass(frozen=True)
class KernelConfig:
    name: str = "vacuum_accelerated"
    a: float = 1.0
    beta: float = math.inf
    operator: str = "hermitian"
    coupling: str = "scalar"
    direction: tuple = (1.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class DetectorConfig:
    omegas: tuple = (1.0,)
    mu: str = "raising"
    seed: int = 0
    lam: float = 0.01


@dataclass(frozen=True)
class SwitchingConfig:
    shape: str = "gaussian"
    route: str = "fourier"
    spectrum: str = "auto"


@dataclass(frozen=True)
class SmearingConfig:
    profile: str = "point"
    sigma: float = 0.0
    center: tuple = (0.0, 0.0, 0.0)
    nodes: int = 4


@dataclass(frozen=True)
class SweepConfig:
    T: tuple = (5.0, 10.0, 20.0, 40.0)
    tolerance: float = 0.02
    expect: str = "converged"


@dataclass(frozen=True)
class ChecksConfig:
    detailed_balance: bool = True
    anti_periodicity: bool = True
    route_equivalence: bool = False
    validity: bool = False
    mu_presets: tuple = ()
    omega_max: float = 5.0
    n_omega: int = 41
    tau_max: float = 5.0
    n_tau: int = 200
    kms_tolerance: float = 1e-3
    route_tolerance: float = 1e-6
    mu_spread: float = 5e-3
    validity_threshold: float = 1e-2


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "results"
    formats: tuple = ("tsv",)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    units: str = "natural"
    kernel: KernelConfig = field(default_factory=KernelConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    switching: SwitchingConfig = field(default_factory=SwitchingConfig)
    smearing: SmearingConfig = field(default_factory=SmearingConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    checks: ChecksConfig = field(default_factory=ChecksConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


_SECTION_TYPES = {"kernel": KernelConfig, "detector": DetectorConfig,
                  "switching": SwitchingConfig, "smearing": SmearingConfig,
                  "sweep": SweepConfig, "checks": ChecksConfig, "output": OutputConfig}


def _coerce(value, default, path, problems):
    """Convert a TOML value to the type of the dataclass default."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            problems.append((path, f"expected true/false, got {value!r}"))
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append((path, f"expected an integer, got {value!r}"))
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append((path, f"expected a number, got {value!r}"))
            return value
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, list):
            problems.append((path, f"expected a list, got {value!r}"))
            return value
        if (default and isinstance(default[0], float)) or path.endswith((".omegas", ".T")):
            out = []
            for i, v in enumerate(value):
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    problems.append((f"{path}[{i}]", f"expected a number, got {v!r}"))
                    out.append(v)
                else:
                    out.append(float(v))
            return tuple(out)
        return tuple(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            problems.append((path, f"expected a string, got {value!r}"))
        return value
    return value


def from_dict(data):
    """Build a ScenarioConfig from parsed TOML, raising ConfigError on problems."""
    problems = []
    top = {}
    for key, value in data.items():
        if key in ("name", "units"):
            top[key] = _coerce(value, "", key, problems)
        elif key in _SECTION_TYPES:
            cls = _SECTION_TYPES[key]
            if not isinstance(value, dict):
                problems.append((key, "expected a table"))
                continue
            defaults = cls()
            known = {f.name for f in fields(cls)}
            kwargs = {}
            for k, v in value.items():
                path = f"{key}.{k}"
                if k not in known:
                    problems.append((path, "unknown field"))
                    continue
                kwargs[k] = _coerce(v, getattr(defaults, k), path, problems)
            top[key] = cls(**kwargs)
        else:
            problems.append((key, "unknown section"))
    if problems:
        raise ConfigError(problems)
    cfg = ScenarioConfig(**top)
    validate(cfg)
    return cfg


def parse_config(text):
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError([("<file>", f"not valid TOML: {exc}")]) from exc
    return from_dict(data)


def load_config(path):
    return parse_config(Path(path).read_text())


def to_dict(cfg):
    def clean(v):
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, tuple):
            return [clean(x) for x in v]
        return v
    return clean(asdict(cfg))


def serialize_config(cfg):
    return tomli_w.dumps(to_dict(cfg))


def config_hash(cfg):
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()


def _positive(problems, path, value):
    if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
        problems.append((path, f"must be positive and finite, got {value!r}"))


def _choice(problems, path, value, allowed):
    if value not in allowed:
        problems.append((path, f"must be one of {sorted(allowed)}, got {value!r}"))


def validate(cfg):
    """Raise ConfigError listing every invalid field; return cfg otherwise."""
    p = []
    _choice(p, "units", cfg.units, UNITS)
    k = cfg.kernel
    _choice(p, "kernel.name", k.name, CATALOG)
    _choice(p, "kernel.operator", k.operator, OPERATORS)
    _choice(p, "kernel.coupling", k.coupling, COUPLINGS)
    if k.name == "vacuum_accelerated":
        _positive(p, "kernel.a", k.a)
    if k.name == "thermal_inertial":
        _positive(p, "kernel.beta", k.beta)
    if len(k.direction) != 4:
        p.append(("kernel.direction", "needs four FW-frame components"))
    elif k.coupling == "derivative" and not any(k.direction):
        p.append(("kernel.direction", "must not vanish for derivative coupling"))
    d = cfg.detector
    if not d.omegas:
        p.append(("detector.omegas", "needs at least one gap"))
    for i, om in enumerate(d.omegas):
        if not (isinstance(om, float) and math.isfinite(om) and om != 0):
            p.append((f"detector.omegas[{i}]", f"must be finite and nonzero, got {om!r}"))
    _choice(p, "detector.mu", d.mu, MU_PRESETS)
    _positive(p, "detector.lam", d.lam)
    s = cfg.switching
    _choice(p, "switching.shape", s.shape, SHAPES)
    _choice(p, "switching.route", s.route, ROUTES)
    _choice(p, "switching.spectrum", s.spectrum, SPECTRA)
    sm = cfg.smearing
    _choice(p, "smearing.profile", sm.profile, PROFILES)
    if sm.profile == "gaussian":
        _positive(p, "smearing.sigma", sm.sigma)
        if not 1 <= sm.nodes <= 12:
            p.append(("smearing.nodes", "must lie between 1 and 12"))
    if len(sm.center) != 3:
        p.append(("smearing.center", "needs three components"))
    sw = cfg.sweep
    Ts = sw.T
    if len(Ts) < 3:
        p.append(("sweep.T", "needs at least three interaction times"))
    for i, t in enumerate(Ts):
        _positive(p, f"sweep.T[{i}]", t)
    if all(isinstance(t, float) for t in Ts) and any(b <= a for a, b in zip(Ts, Ts[1:])):
        p.append(("sweep.T", "must be strictly increasing"))
    _positive(p, "sweep.tolerance", sw.tolerance)
    _choice(p, "sweep.expect", sw.expect, VERDICTS)
    c = cfg.checks
    for i, m in enumerate(c.mu_presets):
        _choice(p, f"checks.mu_presets[{i}]", m, MU_PRESETS)
    for name in ("omega_max", "tau_max", "kms_tolerance", "route_tolerance",
                 "mu_spread", "validity_threshold"):
        _positive(p, f"checks.{name}", getattr(c, name))
    for name in ("n_omega", "n_tau"):
        if getattr(c, name) < 2:
            p.append((f"checks.{name}", "must be at least 2"))
    if not cfg.output.directory:
        p.append(("output.directory", "must not be empty"))
    for i, f in enumerate(cfg.output.formats):
        _choice(p, f"output.formats[{i}]", f, ("tsv",))
    if p:
        raise ConfigError(p)
    return cfg


TOLERANCE_FIELDS = {
    "sweep.tolerance": ("sweep", "tolerance"),
    "kms": ("checks", "kms_tolerance"),
    "route": ("checks", "route_tolerance"),
    "mu_spread": ("checks", "mu_spread"),
    "validity": ("checks", "validity_threshold"),
}


def apply_tolerance_overrides(cfg, spec):
    """Apply "key=value,key=value" overrides for the tolerance fields."""
    if not spec:
        return cfg
    problems = []
    for item in spec.split(","):
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in TOLERANCE_FIELDS:
            problems.append((f"--tolerance-overrides.{key}",
                             f"unknown key; expected one of {sorted(TOLERANCE_FIELDS)}"))
            continue
        try:
            value = float(raw)
        except ValueError:
            problems.append((f"--tolerance-overrides.{key}", f"not a number: {raw!r}"))
            continue
        section, name = TOLERANCE_FIELDS[key]
        cfg = replace(cfg, **{section: replace(getattr(cfg, section), **{name: value})})
    if problems:
        raise ConfigError(problems)
    return validate(cfg)


def bundled_scenarios():
    """Name -> path of the scenarios shipped with the package."""
    root = Path(__file__).parent / "scenarios"
    return {p.stem: p for p in sorted(root.glob("*.toml"))}
