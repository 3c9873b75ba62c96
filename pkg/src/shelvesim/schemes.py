"""Level schemes: rates, drives, photon budgets, and configuration geometry.

Internal units are natural: the strong decay rate is 1.0 by default and all
times are expressed in strong lifetimes. The ``scale`` field converts an
internal time to seconds for reporting only; nothing in the dynamics reads
it. The default numbers form the "desk" scheme used throughout the test
suite: a 200:1 decay-rate split that keeps both timescales resolvable in a
single run.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, fields, replace

from .errors import SchemeError


class ConfigurationKind(str, enum.Enum):
    """Three-level geometry: where level 0 sits relative to levels 1 and 2."""

    V = "V"
    LAMBDA = "Lambda"
    CASCADE_E1_ABOVE_E0 = "CascadeE1aboveE0"
    CASCADE_E1_BELOW_E0 = "CascadeE1belowE0"


class RabiOnset(str, enum.Enum):
    """How laser absorption out of a freshly collapsed state is treated.

    ``delayed``: absorption creates a passive accumulator that must be
    stochastically selected before Rabi cycling begins.
    ``immediate``: absorption joins the coherent evolution at once.
    """

    DELAYED = "delayed"
    IMMEDIATE = "immediate"


_CONFIG_VALUES = {
    "v": ConfigurationKind.V,
    "lambda": ConfigurationKind.LAMBDA,
    "cascadee1abovee0": ConfigurationKind.CASCADE_E1_ABOVE_E0,
    "cascadeup": ConfigurationKind.CASCADE_E1_ABOVE_E0,
    "cascadee1belowe0": ConfigurationKind.CASCADE_E1_BELOW_E0,
    "cascadedown": ConfigurationKind.CASCADE_E1_BELOW_E0,
}

# Accepted spellings for boolean flags in scheme files.
_TRUE_WORDS = {"1", "true", "on", "yes"}
_FALSE_WORDS = {"0", "false", "off", "no"}


@dataclass(frozen=True)
class LevelScheme:
    """Validated physical model parameters.

    Build instances through :func:`build_scheme`, which enforces the
    invariants (positive rates, strong faster than weak, photon budgets
    at least 1). The dataclass itself stays dumb so tests can construct
    deliberately out-of-contract instances.
    """

    config: ConfigurationKind = ConfigurationKind.V
    gamma_strong: float = 1.0
    gamma_weak: float = 0.005
    omega_strong: float = 0.3
    omega_weak: float = 0.002
    n_strong_photons: int = 1_000_000
    n_weak_photons: int = 1_000_000
    rabi_onset: RabiOnset = RabiOnset.DELAYED
    stimulated_emission: bool = True
    scale: float = 1.0  # seconds per internal time unit (reporting only)

    def to_si(self, t: float) -> float:
        return t * self.scale

    def from_si(self, seconds: float) -> float:
        return seconds / self.scale


def _coerce(name: str, value):
    """Coerce a raw (string or native) value for field ``name``."""
    if name == "config":
        if isinstance(value, ConfigurationKind):
            return value
        key = str(value).strip().lower()
        if key not in _CONFIG_VALUES:
            raise SchemeError(f"config: unknown configuration {value!r}", field="config")
        return _CONFIG_VALUES[key]
    if name == "rabi_onset":
        if isinstance(value, RabiOnset):
            return value
        try:
            return RabiOnset(str(value).strip().lower())
        except ValueError:
            raise SchemeError(
                f"rabi_onset: expected 'delayed' or 'immediate', got {value!r}",
                field="rabi_onset",
            ) from None
    if name == "stimulated_emission":
        if isinstance(value, bool):
            return value
        word = str(value).strip().lower()
        if word in _TRUE_WORDS:
            return True
        if word in _FALSE_WORDS:
            return False
        raise SchemeError(
            f"stimulated_emission: expected on/off, got {value!r}",
            field="stimulated_emission",
        )
    if name in ("n_strong_photons", "n_weak_photons"):
        try:
            n = int(str(value))
        except ValueError:
            raise SchemeError(f"{name}: expected an integer, got {value!r}", field=name) from None
        return n
    try:
        return float(value)
    except (TypeError, ValueError):
        raise SchemeError(f"{name}: expected a number, got {value!r}", field=name) from None


_FIELD_NAMES = [f.name for f in fields(LevelScheme)]


def build_scheme(raw=None, **overrides) -> LevelScheme:
    """Construct and validate a LevelScheme.

    ``raw`` may be a mapping (string values allowed, as parsed from a
    config file), an existing LevelScheme, or None. Keyword overrides are
    applied on top. The key ``configuration`` is accepted as an alias for
    ``config``.
    """
    values = {}
    if isinstance(raw, LevelScheme):
        values.update({f: getattr(raw, f) for f in _FIELD_NAMES})
    elif raw is not None:
        for key, val in dict(raw).items():
            k = str(key).strip().lower()
            if k == "configuration":
                k = "config"
            if k not in _FIELD_NAMES:
                raise SchemeError(f"unknown scheme key {key!r}", field=str(key))
            values[k] = val
    for key, val in overrides.items():
        if key == "configuration":
            key = "config"
        if key not in _FIELD_NAMES:
            raise SchemeError(f"unknown scheme key {key!r}", field=key)
        values[key] = val

    defaults = LevelScheme()
    merged = {f: _coerce(f, values[f]) if f in values else getattr(defaults, f) for f in _FIELD_NAMES}
    scheme = LevelScheme(**merged)
    validate_scheme(scheme)
    return scheme


def validate_scheme(scheme: LevelScheme) -> None:
    for name in ("gamma_strong", "gamma_weak", "omega_strong", "omega_weak", "scale"):
        value = getattr(scheme, name)
        if not math.isfinite(value) or value <= 0.0:
            raise SchemeError(f"{name} must be positive, got {value}", field=name)
    if scheme.gamma_weak >= scheme.gamma_strong:
        raise SchemeError(
            "weak decay must be slower: require gamma_weak < gamma_strong "
            f"(got {scheme.gamma_weak} >= {scheme.gamma_strong})",
            field="gamma_weak",
        )
    for name in ("n_strong_photons", "n_weak_photons"):
        n = getattr(scheme, name)
        if n < 1:
            raise SchemeError(
                f"{name} must be at least 1 (the field needs a photon to give), got {n}",
                field=name,
            )


def parse_scheme(text: str) -> LevelScheme:
    """Parse a flat key=value scheme description (``#`` starts a comment)."""
    return build_scheme(parse_scheme_dict(text))


def parse_scheme_dict(text: str) -> dict:
    """Parse key=value lines into a raw dict without validating fields."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise SchemeError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise SchemeError(f"line {lineno}: expected key=value, got {line!r}")
        if key in raw:
            raise SchemeError(f"line {lineno}: duplicate key {key!r}", field=key)
        raw[key] = value
    return raw


def serialize_scheme(scheme: LevelScheme) -> str:
    """Canonical key=value form; ``parse_scheme`` round-trips it exactly."""
    lines = []
    for f in fields(LevelScheme):
        value = getattr(scheme, f.name)
        if isinstance(value, enum.Enum):
            value = value.value
        elif isinstance(value, bool):
            value = "on" if value else "off"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def scheme_hash(scheme: LevelScheme) -> str:
    """Short stable digest of the canonical serialization."""
    return hashlib.sha256(serialize_scheme(scheme).encode()).hexdigest()[:12]


def desk_scheme(**overrides) -> LevelScheme:
    """The standard test scheme (defaults of LevelScheme) with overrides."""
    return build_scheme(LevelScheme(), **overrides)


# ---------------------------------------------------------------------------
# Derived rate helpers


def effective_pump_rate(omega: float, gamma_out: float) -> float:
    """Rate at which a damped laser-driven pair feeds its upper level.

    This is the slowest decay eigenvalue of the driven pair (drive omega
    against total upper-level loss gamma_out): omega**2/gamma_out far below
    saturation, capped at gamma_out/2 at and beyond saturation.
    """
    if gamma_out <= 0.0:
        return 0.0
    half = 0.5 * gamma_out
    return half - math.sqrt(max(half * half - omega * omega, 0.0))


def effective_bright_rate(scheme: LevelScheme) -> float:
    """Mean strong-photon emission rate during a bright stretch."""
    if scheme.rabi_onset is RabiOnset.IMMEDIATE:
        w2 = scheme.omega_strong**2
        return scheme.gamma_strong * w2 / (2.0 * w2 + scheme.gamma_strong**2)
    pump = effective_pump_rate(scheme.omega_strong, scheme.gamma_strong)
    return 1.0 / (1.0 / pump + 1.0 / scheme.gamma_strong)


def default_gap_threshold(scheme: LevelScheme) -> float:
    """Bright/dark gap cut: 20 mean bright inter-photon gaps."""
    return 20.0 / effective_bright_rate(scheme)
