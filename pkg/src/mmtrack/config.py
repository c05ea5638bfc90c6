"""Run configuration: defaults, file loading and validation.

Config files are flat JSON objects whose keys are the :class:`RunConfig`
field names. Angles are given in degrees. Command-line overrides are
applied on top of the file, and anything left unset falls back to the
defaults of the chosen experiment.
"""
import json
import math
from dataclasses import asdict, dataclass, fields, replace

from mmtrack.channel import ChannelParams, jakes_rho
from mmtrack.estimators import ESTIMATORS, EstimatorConfig
from mmtrack.sensing import SCHEMES
from mmtrack.solvers import STEP_RULES

EXPERIMENTS = ("mse", "rate", "complexity")
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """A configuration value is missing, unknown or out of range."""

    def __init__(self, field_name, message):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "mse"
    n_t: int = 32
    n_r: int = 64
    paths: int = 1
    delta_deg: float = 3.0
    delta_est_deg: float | None = None
    rho: float | None = 0.8
    f_d: float | None = None
    t_bl: float | None = None
    pathloss: float = 1.0
    m_values: tuple = (4, 6, 8, 10)
    scheme: str = "random-phase"
    g_t: int = 32
    g_r: int = 64
    gbar_t: int = 4
    gbar_r: int = 5
    cosamp_iters: int = 10
    iht_iters: int = 10
    step_size: float = 1.0
    residual_tol: float = 1e-6
    normalize_columns: bool = True
    safeguard: bool = False
    step_rule: str = "normalized"
    dedup: bool = False
    rescan_residual: float | None = None
    snr_db: tuple = (-10.0, 0.0)
    train_snr_db: float | None = None
    blocks: int = 20
    realizations: int = 500
    seed: int = 0
    estimators: tuple = ESTIMATORS
    constant_modulus: bool = False
    workers: int = 1
    out: str | None = None
    format: str = "csv"

    def channel_params(self):
        return ChannelParams(
            self.n_t,
            self.n_r,
            self.paths,
            math.radians(self.delta_deg),
            self.rho,
            self.f_d,
            self.t_bl,
            self.pathloss,
            self.seed,
        )

    def estimator_config(self):
        delta = self.delta_deg if self.delta_est_deg is None else self.delta_est_deg
        return EstimatorConfig(
            sparsity=self.paths,
            g_t=self.g_t,
            g_r=self.g_r,
            gbar_t=self.gbar_t,
            gbar_r=self.gbar_r,
            delta=math.radians(delta),
            cosamp_iters=self.cosamp_iters,
            iht_iters=self.iht_iters,
            residual_tol=self.residual_tol,
            step_size=self.step_size,
            normalize_columns=self.normalize_columns,
            safeguard=self.safeguard,
            step_rule=self.step_rule,
            dedup=self.dedup,
            rescan_residual=self.rescan_residual,
        )

    def echo(self):
        """Plain-dict view used in result headers.

        ``out`` and ``workers`` are left out: they never change the numbers,
        and keeping them would make identical runs differ byte-wise.
        """
        d = asdict(self)
        for k in ("out", "workers"):
            d.pop(k)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


# Parameter sets of the two published experiments; "complexity" reuses the MSE set.
EXPERIMENT_DEFAULTS = {
    "mse": {},
    "rate": {
        "n_t": 16,
        "n_r": 16,
        "rho": 0.9037,
        "g_t": 1000,
        "g_r": 1000,
        "gbar_t": 10,
        "gbar_r": 10,
        "blocks": 100,
        "realizations": 200,
        "m_values": (4, 8),
        "snr_db": (-10.0, -5.0, 0.0, 5.0, 10.0),
    },
    "complexity": {"realizations": 10, "snr_db": (0.0,), "m_values": (8,)},
}

_FIELDS = {f.name: f for f in fields(RunConfig)}
_TUPLE_FIELDS = {"m_values", "snr_db", "estimators"}


def _coerce(name, value):
    if value is None:
        return None
    if name in _TUPLE_FIELDS:
        if isinstance(value, (int, float, str)):
            value = [value]
        if name == "m_values":
            return tuple(int(v) for v in value)
        if name == "snr_db":
            return tuple(float(v) for v in value)
        return tuple(str(v) for v in value)
    default = _FIELDS[name].default
    kind = type(default) if default is not None else None
    if name in ("rho", "f_d", "t_bl", "delta_est_deg", "train_snr_db", "rescan_residual"):
        kind = float
    if name == "out":
        kind = str
    if kind is bool:
        if isinstance(value, str):
            low = value.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ConfigError(name, f"expected a boolean, got {value!r}")
        return bool(value)
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return int(value)
    if kind is float:
        return float(value)
    return value


def validate(cfg):
    """Check every cross-field constraint; raises :class:`ConfigError` naming the field."""
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {EXPERIMENTS}")
    if cfg.format not in FORMATS:
        raise ConfigError("format", f"must be one of {FORMATS}")
    if cfg.scheme not in SCHEMES:
        raise ConfigError("scheme", f"must be one of {SCHEMES}")
    for name in ("n_t", "n_r", "paths", "g_t", "g_r", "cosamp_iters", "iht_iters", "blocks", "realizations", "workers"):
        if getattr(cfg, name) < 1:
            raise ConfigError(name, "must be >= 1")
    for name in ("gbar_t", "gbar_r"):
        if getattr(cfg, name) < 2:
            raise ConfigError(name, "must be >= 2")
    if not cfg.delta_deg > 0:
        raise ConfigError("delta_deg", "must be > 0")
    if cfg.delta_est_deg is not None and not cfg.delta_est_deg > 0:
        raise ConfigError("delta_est_deg", "must be > 0")
    if cfg.rho is not None and not 0.0 <= cfg.rho <= 1.0:
        raise ConfigError("rho", f"must lie in [0, 1], got {cfg.rho}")
    if cfg.rho is None:
        if cfg.f_d is None or cfg.t_bl is None:
            raise ConfigError("rho", "give rho or both f_d and t_bl")
        if cfg.f_d < 0:
            raise ConfigError("f_d", "must be >= 0")
        if not cfg.t_bl > 0:
            raise ConfigError("t_bl", "must be > 0")
        jakes_rho(cfg.f_d, cfg.t_bl)
    if not cfg.pathloss > 0:
        raise ConfigError("pathloss", "must be > 0")
    if not cfg.m_values:
        raise ConfigError("m_values", "need at least one value")
    for m in cfg.m_values:
        if m < 1:
            raise ConfigError("m_values", "every M must be >= 1 (M_T * M_R >= 1)")
        if cfg.scheme == "dft-subset" and m > min(cfg.n_t, cfg.n_r):
            raise ConfigError("m_values", f"dft-subset training needs M <= min(n_t, n_r), got {m}")
    if not cfg.snr_db:
        raise ConfigError("snr_db", "need at least one SNR point")
    if not cfg.estimators:
        raise ConfigError("estimators", "need at least one estimator")
    for e in cfg.estimators:
        if e not in ESTIMATORS:
            raise ConfigError("estimators", f"unknown estimator {e!r}; expected {ESTIMATORS}")
    if cfg.step_rule not in STEP_RULES:
        raise ConfigError("step_rule", f"must be one of {STEP_RULES}")
    if not cfg.step_size > 0:
        raise ConfigError("step_size", "must be > 0")
    if cfg.residual_tol < 0:
        raise ConfigError("residual_tol", "must be >= 0")
    if cfg.rescan_residual is not None and not cfg.rescan_residual > 0:
        raise ConfigError("rescan_residual", "must be > 0")
    if cfg.seed < 0:
        raise ConfigError("seed", "must be >= 0")
    return cfg


def build_config(values=None, experiment=None):
    """RunConfig from a flat mapping, filling experiment defaults; rejects unknown keys."""
    values = dict(values or {})
    unknown = sorted(set(values) - set(_FIELDS))
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")
    exp = experiment or values.get("experiment") or "mse"
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {EXPERIMENTS}")
    merged = {**EXPERIMENT_DEFAULTS[exp], **{k: v for k, v in values.items() if v is not None}}
    merged["experiment"] = exp
    if values.get("rho") is None and ("f_d" in values or "t_bl" in values):
        merged["rho"] = None
    kwargs = {}
    for k, v in merged.items():
        try:
            kwargs[k] = _coerce(k, v)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(k, f"bad value {v!r}") from exc
    return validate(replace(RunConfig(), **kwargs))


def load_config_file(path):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError("<file>", "config file must hold a flat JSON object")
    for k, v in data.items():
        if isinstance(v, dict):
            raise ConfigError(k, "nested values are not allowed; the config is flat")
    return data


def parse_config(path=None, overrides=None):
    """Load ``path`` (if any), apply ``overrides`` and validate."""
    values = load_config_file(path) if path else {}
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    return build_config(values)
