"""Run configuration: defaults, file parsing and admissibility gates.

Configs come from a plain key = value file with [section] headers (or an
equivalent JSON document).  Every field has a default; validation enforces
the admissibility conditions of the simulated system and names the
violated condition in each message:

  * condition A2 - noise spectrum decay (slow) and summability (fast),
  * condition A3 - uniform bound of the slow coupling f,
  * condition A4 - dissipativity gap lambda_1 - L_g > 0,
  * time-step resolution dt <= eps/20 and dt <= delta/4.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .basis import TWO_PI_SQ, parse_field_expr
from .couplings import Coupling, coupling_names, make_coupling
from .stable import NoiseSpectrum, validate_spectrum

LAMBDA_1 = TWO_PI_SQ


class ConfigError(ValueError):
    """Raised when a configuration violates an admissibility condition."""


@dataclass(frozen=True)
class SystemConfig:
    """Fully resolved run parameters."""

    # time scales and discretization
    eps: float = 0.1
    T: float = 1.0
    dt: float | None = None  # None resolves to min(eps/20, delta/4)
    m: int = 16
    alpha: float = 1.5
    delta: float = 0.1
    record_stride: int = 10
    seed: int = 12345
    p: float = 1.0
    # initial data (mode expressions, see basis.parse_field_expr)
    x0: str = "e1 + 0.5*e2"
    y0: str = "0"
    # noise spectra: slow sigma_k = c0 lambda_k^-beta, fast gamma_k = c0_z lambda_k^-gamma_decay
    beta: float = 1.0
    c0: float = 1.0
    gamma_decay: float = 0.5
    c0_z: float = 1.0
    # coupling
    coupling: str = "default"
    a_f: float = 1.0
    a_g: float = 1.0
    b_g: float = 1.0
    # term switches (linear test modes)
    enable_n: bool = True
    enable_f: bool = True
    enable_g: bool = True
    enable_noise_l: bool = True
    enable_noise_z: bool = True
    # numerics
    blow_thresh: float = 1e12
    n_quad: int | None = None  # None resolves to 4m + 1

    def resolved(self) -> "SystemConfig":
        out = self
        if out.dt is None:
            out = replace(out, dt=min(out.eps / 20.0, out.delta / 4.0))
        if out.n_quad is None:
            out = replace(out, n_quad=4 * out.m + 1)
        return out

    # derived objects -----------------------------------------------------

    def coupling_obj(self) -> Coupling:
        return make_coupling(self.coupling, self.a_f, self.a_g, self.b_g)

    def spectrum_l(self) -> NoiseSpectrum:
        return NoiseSpectrum.power_law(self.m, self.alpha, self.beta, self.c0)

    def spectrum_z(self) -> NoiseSpectrum:
        return NoiseSpectrum.power_law(self.m, self.alpha, self.gamma_decay, self.c0_z)

    def x0_coeffs(self) -> np.ndarray:
        return parse_field_expr(self.x0, self.m).coeffs

    def y0_coeffs(self) -> np.ndarray:
        return parse_field_expr(self.y0, self.m).coeffs

    def n_steps(self) -> int:
        cfg = self.resolved()
        n = int(round(cfg.T / cfg.dt))
        if abs(n * cfg.dt - cfg.T) > 1e-9 * max(1.0, cfg.T):
            raise ConfigError(f"T={cfg.T} is not an integer multiple of dt={cfg.dt}")
        return n

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def validate_config(cfg: SystemConfig) -> list[str]:
    """Collect every violated constraint; empty list means admissible."""
    cfg = cfg.resolved()
    out: list[str] = []
    if not 1.0 < cfg.alpha < 2.0:
        out.append(f"alpha out of (1,2): got {cfg.alpha}")
    if cfg.eps <= 0:
        out.append(f"eps must be positive, got {cfg.eps}")
    if cfg.T <= 0:
        out.append(f"T must be positive, got {cfg.T}")
    if cfg.m < 1:
        out.append(f"mode count m must be >= 1, got {cfg.m}")
    if cfg.dt <= 0:
        out.append(f"dt must be positive, got {cfg.dt}")
    elif cfg.eps > 0:
        if cfg.dt > cfg.eps / 20.0 * (1 + 1e-12):
            out.append(
                f"dt={cfg.dt} too coarse for the fast scale: need dt <= eps/20 = {cfg.eps / 20:g}"
            )
        if cfg.delta > 0 and cfg.dt > cfg.delta / 4.0 * (1 + 1e-12):
            out.append(
                f"dt={cfg.dt} too coarse for the block size: need dt <= delta/4 = {cfg.delta / 4:g}"
            )
    if cfg.delta <= 0:
        out.append(f"delta must be positive, got {cfg.delta}")
    elif cfg.dt is not None and cfg.dt > 0:
        ratio = cfg.delta / cfg.dt
        if abs(ratio - round(ratio)) > 1e-9:
            out.append(f"delta={cfg.delta} must be an integer multiple of dt={cfg.dt}")
    if not 1.0 <= cfg.p:
        out.append(f"p must satisfy 1 <= p, got {cfg.p}")
    elif cfg.p >= cfg.alpha:
        out.append(
            f"p={cfg.p} must satisfy p < alpha={cfg.alpha} (moments beyond alpha do not exist)"
        )
    if cfg.record_stride < 1:
        out.append(f"record_stride must be >= 1, got {cfg.record_stride}")
    # noise admissibility
    if 1.0 < cfg.alpha < 2.0:
        out.extend(validate_spectrum(cfg.spectrum_l(), require_beta_bound=True))
        out.extend(validate_spectrum(cfg.spectrum_z(), require_beta_bound=False))
    # coupling gates
    try:
        cp = cfg.coupling_obj()
    except ValueError as exc:
        out.append(str(exc))
        return out
    if cp.lip_g >= LAMBDA_1:
        out.append(
            f"condition A4: lambda1 - L_g must be positive "
            f"(lambda1={LAMBDA_1:.6g}, L_g={cp.lip_g:.6g})"
        )
    if not math.isfinite(cp.f_bound):
        out.append("condition A3: f must declare a finite uniform bound")
    # initial data parse checks
    try:
        cfg.x0_coeffs()
        cfg.y0_coeffs()
    except ValueError as exc:
        out.append(str(exc))
    return out


def require_valid(cfg: SystemConfig) -> SystemConfig:
    cfg = cfg.resolved()
    problems = validate_config(cfg)
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


# --- file parsing ---------------------------------------------------------

_BOOL_FIELDS = {"enable_n", "enable_f", "enable_g", "enable_noise_l", "enable_noise_z"}
_INT_FIELDS = {"m", "record_stride", "seed", "n_quad"}
_STR_FIELDS = {"x0", "y0", "coupling"}
_FLOAT_FIELDS = {
    "eps", "T", "dt", "alpha", "delta", "p", "beta", "c0", "gamma_decay",
    "c0_z", "a_f", "a_g", "b_g", "blow_thresh",
}
_SECTIONS = {"system", "noise", "coupling", "experiment"}

# experiment-level keys that ride along in config files
_EXPERIMENT_KEYS = {
    "eps_grid": "float_list",
    "delta_grid": "float_list",
    "m_grid": "int_list",
    "n_paths": "int",
    "fbar_mode": "str",
    "out": "str",
    "t_burn": "float",
    "t_avg": "float",
    "dt_frozen": "float",
    "fbar_refresh": "float",
}


def _coerce(key: str, raw: str):
    if key in _BOOL_FIELDS:
        low = str(raw).strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean for {key!r}: {raw!r}")
    if key in _INT_FIELDS:
        return int(str(raw).strip())
    if key in _STR_FIELDS:
        return str(raw).strip()
    if key in _FLOAT_FIELDS:
        return float(str(raw).strip())
    raise ConfigError(f"unknown configuration key {key!r}")


def _coerce_experiment(key: str, raw):
    kind = _EXPERIMENT_KEYS[key]
    if kind == "float_list":
        if isinstance(raw, (list, tuple)):
            return [float(v) for v in raw]
        return [float(tok) for tok in str(raw).replace(",", " ").split()]
    if kind == "int_list":
        if isinstance(raw, (list, tuple)):
            return [int(v) for v in raw]
        return [int(tok) for tok in str(raw).replace(",", " ").split()]
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return str(raw).strip()


def parse_config_text(text: str) -> tuple[SystemConfig, dict]:
    """Parse the key = value format.  Returns (config, experiment params).

    Grammar: optional [section] headers ("system", "noise", "coupling",
    "experiment"); one "key = value" per line; '#' starts a comment; keys
    are unique across sections except within [experiment].
    """
    overrides: dict = {}
    experiment: dict = {}
    section = "system"
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip().lower()
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{section}] on line {lineno}")
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected key = value on line {lineno}: {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if section == "experiment":
            if key not in _EXPERIMENT_KEYS:
                raise ConfigError(f"unknown experiment key {key!r} on line {lineno}")
            experiment[key] = _coerce_experiment(key, raw)
        else:
            if key in overrides:
                raise ConfigError(f"duplicate key {key!r} on line {lineno}")
            overrides[key] = _coerce(key, raw)
    return SystemConfig(**overrides), experiment


def parse_config_json(text: str) -> tuple[SystemConfig, dict]:
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ConfigError("JSON config must be an object")
    overrides: dict = {}
    experiment: dict = {}
    for section, body in doc.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section {section!r}")
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be an object")
        for key, raw in body.items():
            if section == "experiment":
                if key not in _EXPERIMENT_KEYS:
                    raise ConfigError(f"unknown experiment key {key!r}")
                experiment[key] = _coerce_experiment(key, raw)
            else:
                if isinstance(raw, bool) and key in _BOOL_FIELDS:
                    overrides[key] = raw
                else:
                    overrides[key] = _coerce(key, raw)
    return SystemConfig(**overrides), experiment


def parse_config(path: str) -> tuple[SystemConfig, dict]:
    """Load a config file (key = value, or JSON when the file starts with '{')."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        cfg, experiment = parse_config_json(text)
    else:
        cfg, experiment = parse_config_text(text)
    return cfg.resolved(), experiment
