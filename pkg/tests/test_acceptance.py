"""Acceptance gate: the quantitative behaviours the simulator must reproduce.

Each test checks one headline capability at desk scale and prints a single
[PASS]/[FAIL] line with the measured margin, then asserts.  The thresholds
are deliberately the loose *contract* tolerances, not the (much tighter)
margins we actually observe; the frozen seeds make every number repeatable.
"""

from dataclasses import replace

import numpy as np

from shelvesim import (
    Channel,
    ConfigurationKind,
    RabiOnset,
    build_scheme,
    desk_scheme,
    run_ensemble,
    run_trajectory,
)
from shelvesim.analysis import (
    compare_records,
    dark_statistics,
    exponential_ks,
    fit_waiting_distribution,
    pooled_waiting_times,
    weak_ordering,
)
from shelvesim.engine import (
    StepRng,
    collapse,
    launch_state,
    policy_dt,
    sample_trigger,
    step,
)
from shelvesim.programs import (
    DecaySpec,
    LevelGraph,
    ModelProgram,
    build_configuration,
    loop_period,
    numeric_dt_cap,
    resonance_loop_program,
    two_level_model,
)


def _gate(capsys, ok, name, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def test_norm_conservation(desk_v_immediate, capsys):
    """Long run keeps the total norm pinned to 1; collapses restore it exactly."""
    _, stats = run_trajectory(desk_v_immediate, 3.0e5, 7, return_stats=True)
    long_ok = stats.steps >= 1_000_000 and stats.max_drift < 1e-6

    # drive the reference loop by hand so we can look at the state right
    # after each reduction
    prog = build_configuration(desk_v_immediate)
    state = launch_state(prog, prog.initial_anchor(), seed=77)
    n_col = 0
    exact = 0
    while n_col < 25:
        dt = policy_dt(state.spec, numeric_dt_cap(state.spec), state.c,
                       state.time, 1e9, 0.02, None)
        rng = StepRng(state.seed, state.step_index)
        new_state, report = step(state, dt)
        chosen = sample_trigger(report, report.s_live, dt, rng)
        if chosen is None:
            state = new_state
        else:
            state = collapse(new_state, chosen)
            n_col += 1
            exact += state.s == 1.0
    ok = long_ok and exact == 25
    _gate(capsys, ok, "norm conservation",
          f"drift {stats.max_drift:.2e} over {stats.steps} steps "
          f"(< 1e-6 required); norm exactly 1 after {exact}/25 collapses")


def test_ready_components_are_passive(capsys):
    """Zeroing the accumulated ready weight must not change realized evolution."""
    programs = []
    for onset in (RabiOnset.IMMEDIATE, RabiOnset.DELAYED):
        for kind in ConfigurationKind:
            programs.append(build_configuration(
                desk_scheme(config=kind, rabi_onset=onset)))
        programs.append(two_level_model(desk_scheme(rabi_onset=onset)))
    programs.append(resonance_loop_program(desk_scheme()))

    worst = 0.0
    fed = 0
    for prog in programs:
        state = launch_state(prog, prog.initial_anchor(), seed=5)
        dt = 0.02
        for k in range(180):
            state, _ = step(state, dt)
            if k % 60 != 59:
                continue
            if state.q.size and state.q.sum() > 0.0:
                fed += 1
            bare, _ = step(replace(state, q=np.zeros_like(state.q)), dt)
            loaded, _ = step(state, dt)
            worst = max(worst, float(np.max(np.abs(loaded.c - bare.c))))
    ok = worst < 1e-12 and fed >= 2 * (len(programs) - 1)
    _gate(capsys, ok, "ready components passive",
          f"max realized-amplitude deviation {worst:.2e} across "
          f"{len(programs)} programs (< 1e-12 required; "
          f"{fed} checkpoints carried ready weight)")


def test_trigger_statistics(desk_v_immediate, capsys):
    """Bernoulli firing frequency and two-channel branching match the currents."""
    # constant-probability self-loop: every step fires with p = J*dt/s = 0.05
    freq_graph = LevelGraph(
        drives=(), decays=(DecaySpec(0, 0, 1.0, Channel.STRONG),),
        rest_level=0, shelf_level=-1, expected_ordering=None)
    freq_prog = ModelProgram(desk_v_immediate, freq_graph, RabiOnset.IMMEDIATE,
                             name="bernoulli")
    _, st = run_trajectory(desk_v_immediate, 5000.0, 1, target_p=0.05,
                           program=freq_prog, return_stats=True)
    freq = st.collapses / st.steps
    freq_ok = st.steps >= 90_000 and abs(freq - 0.05) <= 0.002

    # two competing loops, rates 1.0 and 0.005: branching ratio should be 200
    ratio_graph = LevelGraph(
        drives=(),
        decays=(DecaySpec(0, 0, 1.0, Channel.STRONG),
                DecaySpec(0, 0, 0.005, Channel.WEAK)),
        rest_level=0, shelf_level=-1, expected_ordering=None)
    ratio_prog = ModelProgram(desk_v_immediate, ratio_graph, RabiOnset.IMMEDIATE,
                              name="multinomial")
    rec, st2 = run_trajectory(desk_v_immediate, 1.0e5, 1, target_p=0.005,
                              program=ratio_prog, return_stats=True)
    counts = rec.counts()
    ratio = counts[Channel.STRONG] / counts[Channel.WEAK]
    ratio_ok = st2.collapses >= 100_000 and 190.0 <= ratio <= 210.0

    _gate(capsys, freq_ok and ratio_ok, "trigger statistics",
          f"firing frequency {freq:.4f} (want 0.050 +- 0.002, "
          f"{st.steps} steps); channel ratio {ratio:.1f} "
          f"(want 190..210, {st2.collapses} collapses)")


def test_photon_budget_exhaustion(capsys):
    """A 100-photon strong field yields exactly 100 emissions, then halts."""
    results = []
    for onset in ("immediate", "delayed"):
        scheme = build_scheme(rabi_onset=onset, n_strong_photons=100)
        prog = two_level_model(scheme)
        rec, stats = run_trajectory(scheme, 1.0e5, 2, program=prog,
                                    return_stats=True)
        results.append((onset, rec.counts()[Channel.STRONG], stats.terminated))
    ok = all(n == 100 and term for _, n, term in results)
    _gate(capsys, ok, "photon budget",
          "; ".join(f"{onset}: {n} strong emissions, terminated={term}"
                    for onset, n, term in results))


def test_waiting_time_rates_match_oracle(big_nrules, desk_oracle, capsys):
    """Pooled strong waits fit a double exponential at the analytic rates."""
    waits = pooled_waiting_times(big_nrules, Channel.STRONG)
    fit = fit_waiting_distribution(waits)
    fast_ref = 0.5 * desk_oracle.beta1
    rel_fast = abs(fit.fast_rate - fast_ref) / fast_ref
    rel_slow = abs(fit.slow_rate - desk_oracle.lambda2) / desk_oracle.lambda2
    ok = waits.size >= 10_000 and rel_fast <= 0.10 and rel_slow <= 0.10
    _gate(capsys, ok, "waiting-time rates",
          f"fast {fit.fast_rate:.5f} vs {fast_ref:.5f} (rel {rel_fast:.3f}), "
          f"slow {fit.slow_rate:.6f} vs {desk_oracle.lambda2:.6f} "
          f"(rel {rel_slow:.3f}), n={waits.size} (tolerance 10%)")


def test_dark_periods_exponential(big_nrules, desk_oracle, capsys):
    """Dark-period excesses over the threshold are Exp(lambda2) distributed."""
    dark = dark_statistics(big_nrules, 150.0)
    mean_ref = 1.0 / desk_oracle.lambda2
    rel_mean = abs(dark.mean_excess - mean_ref) / mean_ref
    _, pvalue = exponential_ks(dark.excesses, 1.0 / dark.mean_excess)
    ok = dark.count >= 100 and rel_mean <= 0.10 and pvalue > 0.01
    _gate(capsys, ok, "dark-period statistics",
          f"{dark.count} dark periods, mean excess {dark.mean_excess:.1f} vs "
          f"{mean_ref:.1f} (rel {rel_mean:.3f}, tolerance 10%); "
          f"exponential KS p={pvalue:.3f} (> 0.01 required)")


def test_weak_photon_ordering(capsys):
    """Each configuration puts its weak photon on the expected side of a dark period."""
    cases = [
        ("v", {}, 2.0e4, "after"),
        ("lambda", {"omega_weak": 0.05}, 2.0e4, "before"),
        ("cascadeup", {}, 2.0e4, "before"),
        ("cascadedown", {"omega_weak": 0.01}, 5.0e4, "after"),
    ]
    details = []
    ok = True
    for config, overrides, t_max, side in cases:
        scheme = build_scheme(config=config, **overrides)
        records = run_ensemble(scheme, 12, t_max, base_seed=42)
        stats = weak_ordering(records, 150.0)
        classified = stats.n_before + stats.n_after
        frac = stats.fraction(side)
        ok = ok and classified >= 50 and frac >= 0.99
        details.append(f"{config}: {frac:.3f} {side} ({classified} classified)")
    _gate(capsys, ok, "weak-photon ordering",
          "; ".join(details) + " (want >= 0.99 of >= 50)")


def test_cross_engine_agreement(big_nrules, big_mcwf, desk_v_immediate, capsys):
    """Reduction-walk and jump-unravelling ensembles are statistically alike."""
    report = compare_records(big_nrules, big_mcwf, 150.0)
    same_ok = report.strong.pvalue > 0.01 and report.weak.pvalue > 0.01

    # negative control: doubling the strong drive must be detectable
    detuned = build_scheme(rabi_onset="immediate", omega_strong=0.6)
    control = run_ensemble(detuned, 4, 2.0e5, base_seed=33, target_p=0.005)
    control_p = compare_records(control, big_mcwf, 150.0).min_pvalue()
    ok = same_ok and control_p < 1e-3
    _gate(capsys, ok, "cross-engine agreement",
          f"strong KS p={report.strong.pvalue:.3f}, "
          f"weak KS p={report.weak.pvalue:.3f} (both > 0.01 required); "
          f"negative control p={control_p:.1e} (< 1e-3 required)")


def test_radiationless_loop(capsys):
    """With decays disabled the three-state loop circulates without emitting."""
    scheme = desk_scheme()
    prog = resonance_loop_program(scheme)
    horizon = 100.0 * loop_period(scheme)
    details = []
    ok = True
    for path in ("reference", "kernel"):
        rec, stats = run_trajectory(scheme, horizon, 0, max_dt=0.04,
                                    program=prog, path=path, return_stats=True)
        ok = ok and rec.n_events == 0 and stats.max_drift <= 1e-9
        details.append(f"{path}: drift {stats.max_drift:.2e}, "
                       f"{rec.n_events} emissions, {stats.steps} steps")
    _gate(capsys, ok, "radiationless loop",
          "; ".join(details) + " (drift <= 1e-9, zero emissions required)")
