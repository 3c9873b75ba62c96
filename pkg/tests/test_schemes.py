"""Parameter-table construction, validation, parsing and serialization."""

import math

import numpy as np
import pytest

from shelvesim import ConfigurationKind, RabiOnset, build_scheme, desk_scheme
from shelvesim.errors import SchemeError
from shelvesim.schemes import (
    default_gap_threshold,
    effective_bright_rate,
    effective_pump_rate,
    parse_scheme,
    scheme_hash,
    serialize_scheme,
)


def test_desk_defaults():
    s = desk_scheme()
    assert s.config is ConfigurationKind.V
    assert s.gamma_strong == 1.0
    assert s.gamma_weak == 0.005
    assert s.omega_strong == 0.3
    assert s.omega_weak == 0.002
    assert s.n_strong_photons == 1_000_000
    assert s.n_weak_photons == 1_000_000
    assert s.rabi_onset is RabiOnset.DELAYED
    assert s.stimulated_emission is True
    assert s.scale == 1.0


def test_si_scale_accepted():
    s = build_scheme(gamma_strong=1e8, gamma_weak=0.5, omega_strong=3e7,
                     omega_weak=2e5, scale=1e-8)
    assert s.gamma_strong == 1e8
    # one desk time unit corresponds to scale seconds
    assert s.to_si(1.0) == 1e-8
    assert s.from_si(1e-8) == 1.0


def test_weak_must_be_slower():
    with pytest.raises(SchemeError, match="weak decay must be slower") as err:
        build_scheme(gamma_weak=1.0)
    assert err.value.field == "gamma_weak"


@pytest.mark.parametrize("field", ["gamma_strong", "gamma_weak", "omega_strong",
                                   "omega_weak", "scale"])
def test_positive_rates_required(field):
    with pytest.raises(SchemeError, match="must be positive") as err:
        build_scheme(**{field: 0.0})
    assert err.value.field == field


@pytest.mark.parametrize("field", ["n_strong_photons", "n_weak_photons"])
def test_photon_budget_floor(field):
    with pytest.raises(SchemeError, match="needs a photon to give"):
        build_scheme(**{field: 0})


def test_unknown_key_rejected():
    with pytest.raises(SchemeError):
        build_scheme(rabi_speed="fast")


def test_configuration_alias():
    s = build_scheme(configuration="lambda")
    assert s.config is ConfigurationKind.LAMBDA


@pytest.mark.parametrize("text,kind", [
    ("v", ConfigurationKind.V),
    ("lambda", ConfigurationKind.LAMBDA),
    ("cascadeup", ConfigurationKind.CASCADE_E1_ABOVE_E0),
    ("cascadedown", ConfigurationKind.CASCADE_E1_BELOW_E0),
])
def test_config_value_aliases(text, kind):
    assert build_scheme(config=text).config is kind


def test_parse_scheme_text():
    text = """
    # strong transition
    gamma_strong = 2.0
    omega_strong = 0.4
    configuration = v
    rabi_onset = immediate
    stimulated_emission = off
    """
    s = parse_scheme(text)
    assert s.gamma_strong == 2.0
    assert s.omega_strong == 0.4
    assert s.rabi_onset is RabiOnset.IMMEDIATE
    assert s.stimulated_emission is False


def test_parse_scheme_bad_line():
    with pytest.raises(SchemeError, match="expected key=value"):
        parse_scheme("gamma_strong 2.0")


def test_parse_scheme_duplicate_key():
    with pytest.raises(SchemeError, match="duplicate key"):
        parse_scheme("gamma_strong = 2\ngamma_strong = 3\n")


def test_serialize_round_trip_exact():
    rng = np.random.default_rng(7)
    for _ in range(25):
        gs = float(rng.uniform(0.5, 5.0))
        scheme = build_scheme(
            config=rng.choice(["v", "lambda", "cascadeup", "cascadedown"]),
            gamma_strong=gs,
            gamma_weak=float(rng.uniform(1e-4, 0.4)) * gs,
            omega_strong=float(rng.uniform(0.01, 2.0)),
            omega_weak=float(rng.uniform(1e-4, 0.5)),
            rabi_onset=rng.choice(["immediate", "delayed"]),
            stimulated_emission=bool(rng.integers(2)),
            n_strong_photons=int(rng.integers(1, 10**7)),
            scale=float(rng.uniform(0.1, 10.0)),
        )
        text = serialize_scheme(scheme)
        again = parse_scheme(text)
        assert again == scheme
        # canonical form: serializing the reparse reproduces the bytes
        assert serialize_scheme(again) == text


def test_serialize_is_canonical():
    text = serialize_scheme(desk_scheme())
    assert text.endswith("\n")
    assert "config = V" in text
    assert "rabi_onset = delayed" in text
    assert "stimulated_emission = on" in text


def test_scheme_hash_stability():
    a = scheme_hash(desk_scheme())
    b = scheme_hash(desk_scheme())
    c = scheme_hash(desk_scheme(omega_weak=0.0021))
    assert a == b
    assert a != c
    assert len(a) == 12


def test_effective_pump_rate():
    # half-difference of the damped-oscillator roots; exact at the desk point
    assert effective_pump_rate(0.3, 1.0) == pytest.approx(0.1, abs=1e-15)
    # weak drive: omega^2 / gamma
    assert effective_pump_rate(1e-3, 1.0) == pytest.approx(1e-6, rel=1e-4)
    # hard drive saturates at gamma/2
    assert effective_pump_rate(50.0, 1.0) == pytest.approx(0.5)
    assert effective_pump_rate(0.3, 0.0) == 0.0
    assert effective_pump_rate(0.3, -1.0) == 0.0


def test_bright_rate_and_default_gap():
    imm = desk_scheme(rabi_onset="immediate")
    dl = desk_scheme()
    r_imm = effective_bright_rate(imm)
    r_del = effective_bright_rate(dl)
    assert r_imm == pytest.approx(0.07627118644067797, rel=1e-12)
    assert r_del == pytest.approx(1.0 / 11.0, rel=1e-12)
    assert default_gap_threshold(imm) == pytest.approx(20.0 / r_imm, rel=1e-12)
    assert default_gap_threshold(dl) == pytest.approx(220.0, rel=1e-12)


def test_scale_round_trip():
    s = desk_scheme(scale=2.5)
    for t in (0.0, 1.0, 137.035999):
        assert math.isclose(s.from_si(s.to_si(t)), t, rel_tol=1e-15, abs_tol=0.0)
