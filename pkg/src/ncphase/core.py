"""Model parameters and the noncommutativity moments shared by every module.

All quantities are in natural units with hbar = 1 and the Planck length
l_P = 1.  The auxiliary oscillator mass is fixed by sqrt(hbar/(m_osc
omega_osc)) = l_P and therefore never appears as an input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

DEFAULT_OMEGA_OSC = 100.0

#: Keys accepted by the key=value parameter file.
MODEL_KEYS = ("c_theta", "c_eta", "mass", "omega", "omega_osc", "alpha", "beta")


class ConfigError(ValueError):
    """Raised for malformed or invalid parameter input."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless physical inputs.

    Parameters
    ----------
    c_theta, c_eta : float
        Coordinate and momentum noncommutativity constants.
    mass : float
        Particle mass.
    omega : float
        Oscillator frequency; 0 selects the free particle.
    omega_osc : float
        Frequency of the two auxiliary oscillators.
    alpha, beta : float
        Weights of the momentum and coordinate parts of the squared-length
        operator ``alpha**2 P**2 + beta**2 X**2``.
    """

    c_theta: float = 0.0
    c_eta: float = 0.0
    mass: float = 1.0
    omega: float = 1.0
    omega_osc: float = DEFAULT_OMEGA_OSC
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{f.name} must be a real number, got {value!r}", f.name)
            if not math.isfinite(value):
                raise ConfigError(f"{f.name} must be finite, got {value!r}", f.name)
            object.__setattr__(self, f.name, float(value))
        if self.mass <= 0:
            raise ConfigError(f"mass must be > 0, got {self.mass}", "mass")
        if self.omega < 0:
            raise ConfigError(f"omega must be >= 0, got {self.omega}", "omega")
        if self.omega_osc <= 0:
            raise ConfigError(f"omega_osc must be > 0, got {self.omega_osc}", "omega_osc")
        if self.c_theta < 0:
            raise ConfigError(f"c_theta must be >= 0, got {self.c_theta}", "c_theta")
        if self.c_eta < 0:
            raise ConfigError(f"c_eta must be >= 0, got {self.c_eta}", "c_eta")

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    @property
    def commutative(self) -> bool:
        return self.c_theta == 0.0 and self.c_eta == 0.0


def mean_theta_sq(params: ModelParams) -> float:
    """<theta^2> over the a-oscillator ground state, 3 c_theta^2 / 2."""
    return 1.5 * params.c_theta**2


def mean_eta_sq(params: ModelParams) -> float:
    """<eta^2> over the b-oscillator ground state, 3 c_eta^2 / 2."""
    return 1.5 * params.c_eta**2


def parse_config(text: str, extra_keys=()) -> tuple[ModelParams, dict[str, str]]:
    """Parse ``key=value`` lines into model parameters plus run settings.

    Blank lines and ``#`` comments are ignored.  Model keys must be decimal
    literals.  Keys listed in ``extra_keys`` are returned verbatim (as
    strings) for the caller to interpret; any other key is an error.
    """
    model: dict[str, float] = {}
    extras: dict[str, str] = {}
    allowed_extra = set(extra_keys)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in model or key in extras:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}", key)
        if key in MODEL_KEYS:
            try:
                model[key] = float(value)
            except ValueError:
                raise ConfigError(
                    f"line {lineno}: {key} expects a decimal literal, got {value!r}", key
                ) from None
        elif key in allowed_extra:
            extras[key] = value
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}", key)
    return ModelParams(**model), extras


def load_config(path, extra_keys=()) -> tuple[ModelParams, dict[str, str]]:
    return parse_config(Path(path).read_text(), extra_keys)


def format_config(params: ModelParams) -> str:
    return "".join(f"{k} = {getattr(params, k)!r}\n" for k in MODEL_KEYS)
