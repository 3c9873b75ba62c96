"""Trajectory engine: coherent sub-evolution, probability currents,
stochastic triggering, collapse, and relaunch.

Between collapses the realized slots evolve under the scope's coupling
matrix with non-Hermitian drains; every ready sink accumulates exactly the
square modulus its sources lose, so the recomputed total stays pinned at 1
up to float rounding. The trigger is a per-sink Bernoulli draw each step
with probability J_k * dt / s, where s is the square modulus still living
in the realized slots. Division by the live modulus (rather than by the
frozen total) keeps the hazard of an undisturbed atom constant in time;
rescaling every amplitude by a common factor changes nothing.

Two execution paths produce identical trajectories: a plain-Python
reference used by the unit tests, and a compiled kernel (``_kernel``) used
for production ensembles. Both consume the same compiled scope tables and
the same counter-based random stream.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ._rng import spawn_seed, uniform
from .errors import NumericError, StepRejected, TriggerPreconditionError
from .programs import (
    MAX_SLOTS,
    ModelProgram,
    ScopeSpec,
    build_configuration,
    compile_tables,
    numeric_dt_cap,
)
from .records import EmissionRecord
from .schemes import LevelScheme
from .components import BasisLabel

DEFAULT_TARGET_P = 0.02
TRIGGER_CAP = 0.1


class StepRng:
    """Draws for one integrator step, keyed (seed, step, draw index)."""

    def __init__(self, seed: int, step_index: int):
        self.seed = seed
        self.step_index = step_index

    def draw(self, k: int) -> float:
        return uniform(self.seed, self.step_index, k)


@dataclass
class CurrentReport:
    """Per-sink probability currents at the step midpoint."""

    currents: np.ndarray
    total: float
    time: float
    s_live: float


@dataclass
class SystemState:
    """Reference-path system state between steps.

    ``c`` holds the realized slot amplitudes (padded to three entries);
    ``q`` the square modulus accumulated by each ready sink. ``s`` is
    always recomputed from those, never cached.
    """

    program: ModelProgram
    anchor: BasisLabel
    spec: ScopeSpec
    c: np.ndarray
    q: np.ndarray
    time: float
    seed: int
    step_index: int = 0
    n_collapses: int = 0
    max_drift: float = 0.0
    events: tuple = ()

    @property
    def s(self) -> float:
        live = float(np.sum(self.c.real**2 + self.c.imag**2))
        return live + float(self.q.sum())

    @property
    def s_live(self) -> float:
        return float(np.sum(self.c.real**2 + self.c.imag**2))

    def components(self) -> list:
        return self.scope().components

    def scope(self):
        return self.program.build_scope(self.anchor, amplitudes=self.c, accumulated=self.q)

    def clone(self) -> "SystemState":
        return replace(self, c=self.c.copy(), q=self.q.copy())


def launch_state(program: ModelProgram, anchor: BasisLabel, time: float = 0.0,
                 seed: int = 0, step_index: int = 0, n_collapses: int = 0,
                 max_drift: float = 0.0, events: tuple = ()) -> SystemState:
    """Fresh single-component state: the anchor realized at exactly unit norm."""
    spec = program.spec_for(anchor)
    c = np.zeros(MAX_SLOTS, np.complex128)
    c[0] = 1.0
    q = np.zeros(len(spec.sinks), np.float64)
    return SystemState(program, anchor, spec, c, q, time, seed,
                       step_index=step_index, n_collapses=n_collapses,
                       max_drift=max_drift, events=events)


# ---------------------------------------------------------------------------
# One integrator step (reference path)


def _derivative(spec: ScopeSpec, h01, h02, h12, g0, g1, g2, c):
    d0 = -1j * (h01 * c[1] + h02 * c[2]) - 0.5 * g0 * c[0]
    d1 = -1j * (h01 * c[0] + h12 * c[2]) - 0.5 * g1 * c[1]
    d2 = -1j * (h02 * c[0] + h12 * c[1]) - 0.5 * g2 * c[2]
    return np.array([d0, d1, d2])


def _spec_coeffs(spec: ScopeSpec):
    h = [0.0, 0.0, 0.0]
    for (i, j, omega, _kind) in spec.couplings:
        a, b = (i, j) if i < j else (j, i)
        index = {(0, 1): 0, (0, 2): 1, (1, 2): 2}[(a, b)]
        h[index] = 0.5 * omega
    g = [0.0, 0.0, 0.0]
    for sink in spec.sinks:
        g[sink.source_slot] += sink.rate
    return h[0], h[1], h[2], g[0], g[1], g[2]


def step(state: SystemState, dt: float) -> tuple:
    """Advance one RK4 step; returns (new_state, CurrentReport).

    Raises :class:`StepRejected` when any single-sink trigger probability
    would exceed the 0.1 cap for this dt; the caller should halve and
    retry. The ready-sink gains are tied to the realized losses so the
    total square modulus is conserved identically.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    spec = state.spec
    h01, h02, h12, g0, g1, g2 = _spec_coeffs(spec)
    c = state.c

    k1 = _derivative(spec, h01, h02, h12, g0, g1, g2, c)
    cm1 = c + (0.5 * dt) * k1
    k2 = _derivative(spec, h01, h02, h12, g0, g1, g2, cm1)
    cm2 = c + (0.5 * dt) * k2
    k3 = _derivative(spec, h01, h02, h12, g0, g1, g2, cm2)
    ce = c + dt * k3
    k4 = _derivative(spec, h01, h02, h12, g0, g1, g2, ce)
    c_new = c + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    s_live_before = float(np.sum(c.real**2 + c.imag**2))
    s_mid = float(np.sum(cm2.real**2 + cm2.imag**2))
    s_live_after = float(np.sum(c_new.real**2 + c_new.imag**2))

    n_sinks = len(spec.sinks)
    currents = np.zeros(n_sinks)
    weights = np.zeros(n_sinks)
    for k, sink in enumerate(spec.sinks):
        src = sink.source_slot
        mid_mod = cm2[src].real**2 + cm2[src].imag**2
        currents[k] = sink.rate * mid_mod
        weights[k] = sink.rate * (
            (c[src].real**2 + c[src].imag**2)
            + 4.0 * mid_mod
            + (c_new[src].real**2 + c_new[src].imag**2)
        )
    total = float(currents.sum())
    if n_sinks and s_mid > 0.0:
        worst = float(currents.max()) * dt / s_mid
        if worst > TRIGGER_CAP:
            raise StepRejected(
                f"trigger probability {worst:.3g} exceeds cap {TRIGGER_CAP}",
                suggested_dt=0.5 * dt,
            )

    q_new = state.q.copy()
    lost = s_live_before - s_live_after
    weight_sum = float(weights.sum())
    if weight_sum > 0.0 and lost > 0.0:
        q_new += lost * (weights / weight_sum)

    s_total_before = s_live_before + float(state.q.sum())
    s_total_after = s_live_after + float(q_new.sum())
    drift = max(abs(s_total_after - 1.0), abs(s_total_after - s_total_before))

    report = CurrentReport(currents=currents, total=total,
                           time=state.time + 0.5 * dt, s_live=s_mid)
    new_state = replace(
        state,
        c=c_new,
        q=q_new,
        time=state.time + dt,
        step_index=state.step_index + 1,
        max_drift=max(state.max_drift, drift),
    )
    return new_state, report


def scope_currents(scope) -> np.ndarray:
    """Probability current into each ready component of a scope, in
    ``ready_indices()`` order.

    A rate feed carries J = rate * |c_source|^2. A coherent feed carries
    the analytic growth rate of the target's square modulus,
    J = sum_j 2 Im(H_kj c_j conj(c_k)) with H_kj = coupling/2, clamped at
    zero from below (only the positive part can trigger).
    """
    ready = scope.ready_indices()
    currents = np.zeros(len(ready))
    for out_idx, k in enumerate(ready):
        amp_k = scope.components[k].amplitude
        j_k = 0.0
        for edge in scope.edges:
            if edge.target != k:
                continue
            src = scope.components[edge.source].amplitude
            if edge.feed == "rate":
                j_k += edge.coupling * (src.real**2 + src.imag**2)
            else:
                j_k += 2.0 * (0.5 * edge.coupling * src * amp_k.conjugate()).imag
        currents[out_idx] = max(j_k, 0.0)
    return currents


def compute_currents(state: SystemState) -> CurrentReport:
    """Instantaneous currents into every ready component of the state's scope."""
    currents = scope_currents(state.scope())
    return CurrentReport(currents=currents, total=float(currents.sum()),
                         time=state.time, s_live=state.s_live)


def sample_trigger(report: CurrentReport, s: float, dt: float, rng) -> int | None:
    """Independent Bernoulli trigger per ready sink; returns the chosen index.

    Each sink k fires with probability J_k * dt / s. When several fire in
    the same step the winner is drawn with weights J_k. Realized components
    are never candidates.
    """
    currents = report.currents
    if np.any(currents < 0.0):
        raise TriggerPreconditionError("negative current passed to sample_trigger")
    if s <= 0.0:
        raise TriggerPreconditionError("nonpositive live square modulus")
    probs = currents * (dt / s)
    if np.any(probs > TRIGGER_CAP):
        raise TriggerPreconditionError(
            f"trigger probability exceeds cap {TRIGGER_CAP}; reduce dt"
        )
    fired = [k for k in range(len(probs)) if rng.draw(k) < probs[k]]
    if not fired:
        return None
    if len(fired) == 1:
        return fired[0]
    weights = currents[fired]
    pick = rng.draw(len(probs)) * float(weights.sum())
    acc = 0.0
    for idx, k in enumerate(fired):
        acc += float(weights[idx])
        if pick < acc or idx == len(fired) - 1:
            return k
    return fired[-1]


def collapse(state: SystemState, chosen: int) -> SystemState:
    """Realize the chosen ready sink and relaunch around its label.

    Every non-chosen amplitude is zeroed and discarded; the chosen label
    becomes the sole component at exactly unit square modulus. If the sink
    carries an emission tag the photon is appended to the event record.
    """
    spec = state.spec
    if chosen < 0 or chosen >= len(spec.sinks):
        raise ValueError(f"no ready sink with index {chosen}")
    sink = spec.sinks[chosen]
    label = state.program.sink_label(state.anchor, sink)
    events = state.events
    if sink.emit:
        events = events + ((state.time, sink.channel),)
    return launch_state(
        state.program,
        label,
        time=state.time,
        seed=state.seed,
        step_index=state.step_index,
        n_collapses=state.n_collapses + 1,
        max_drift=state.max_drift,
        events=events,
    )


# ---------------------------------------------------------------------------
# Trajectory drivers


@dataclass
class TrajectoryStats:
    steps: int
    collapses: int
    max_drift: float
    final_time: float
    final_anchor: BasisLabel | None
    terminated: bool  # ran out of photons / reached a terminal scope


def policy_dt(spec: ScopeSpec, dt_num: float, c: np.ndarray, t: float,
              t_max: float, target_p: float, max_dt: float | None) -> float:
    """Step-size policy: numerics cap, trigger-probability cap, horizon."""
    dt = dt_num
    if max_dt is not None:
        dt = min(dt, max_dt)
    s_live = float(np.sum(c.real**2 + c.imag**2))
    hazard = 0.0
    for sink in spec.sinks:
        src = sink.source_slot
        hazard += sink.rate * (c[src].real**2 + c[src].imag**2)
    if hazard > 0.0:
        dt = min(dt, target_p * s_live / hazard)
    return min(dt, t_max - t)


def run_reference_trajectory(program: ModelProgram, t_max: float, seed: int,
                             target_p: float = DEFAULT_TARGET_P,
                             max_dt: float | None = None,
                             max_steps: int = 50_000_000):
    """Pure-Python trajectory walk mirroring the compiled kernel move for move."""
    state = launch_state(program, program.initial_anchor(), seed=seed)
    terminated = False
    steps = 0
    while state.time < t_max:
        spec = state.spec
        if spec.terminal:
            terminated = True
            break
        dt = policy_dt(spec, numeric_dt_cap(spec), state.c, state.time,
                       t_max, target_p, max_dt)
        if dt <= 0.0:
            break
        rng = StepRng(state.seed, state.step_index)
        while True:
            try:
                new_state, report = step(state, dt)
                break
            except StepRejected as rej:
                dt = rej.suggested_dt
        chosen = sample_trigger(report, report.s_live, dt, rng)
        if chosen is None:
            state = new_state
        else:
            state = collapse(new_state, chosen)
        steps += 1
        if steps >= max_steps:
            raise NumericError(f"exceeded {max_steps} steps before reaching t_max")
    record_times = np.array([t for (t, _ch) in state.events])
    record_chans = np.array([ch.code for (_t, ch) in state.events], np.int8)
    record = EmissionRecord(0, t_max, record_times, record_chans)
    stats = TrajectoryStats(steps=steps, collapses=state.n_collapses,
                            max_drift=state.max_drift, final_time=state.time,
                            final_anchor=state.anchor, terminated=terminated)
    return record, stats


def run_trajectory(scheme: LevelScheme, t_max: float, seed: int,
                   target_p: float = DEFAULT_TARGET_P,
                   max_dt: float | None = None,
                   program: ModelProgram | None = None,
                   trajectory_id: int = 0,
                   path: str = "kernel",
                   return_stats: bool = False):
    """Run one trajectory and return its EmissionRecord.

    ``path`` selects the compiled kernel (default) or the pure-Python
    reference. Identical seeds produce identical records on either path.
    """
    if t_max < 0.0:
        raise ValueError("t_max must be nonnegative")
    if program is None:
        program = build_configuration(scheme)
    if t_max == 0.0:
        record = EmissionRecord(trajectory_id, 0.0)
        if return_stats:
            return record, TrajectoryStats(0, 0, 0.0, 0.0, program.initial_anchor(), False)
        return record
    if path == "reference":
        record, stats = run_reference_trajectory(program, t_max, seed,
                                                 target_p=target_p, max_dt=max_dt)
        record = EmissionRecord(trajectory_id, t_max, record.times, record.channels)
    elif path == "kernel":
        from ._kernel import run_compiled_trajectory

        record, stats = run_compiled_trajectory(program, t_max, seed,
                                                target_p=target_p, max_dt=max_dt,
                                                trajectory_id=trajectory_id)
    else:
        raise ValueError(f"unknown path {path!r}")
    if return_stats:
        return record, stats
    return record


def run_ensemble(scheme: LevelScheme, n_trajectories: int, t_max: float,
                 base_seed: int, target_p: float = DEFAULT_TARGET_P,
                 engine: str = "nrules", program: ModelProgram | None = None,
                 max_dt: float | None = None) -> list:
    """Independent trajectories with per-index derived seeds.

    Trajectory index ``i`` always gets seed ``spawn_seed(base_seed, i)``,
    so the ensemble is reproducible regardless of execution order and can
    be sharded across workers by index without coordination.
    """
    if n_trajectories < 1:
        raise ValueError("n_trajectories must be at least 1")
    records = []
    if engine == "nrules":
        for idx in range(n_trajectories):
            records.append(run_trajectory(
                scheme, t_max, spawn_seed(base_seed, idx),
                target_p=target_p, max_dt=max_dt, program=program,
                trajectory_id=idx,
            ))
    elif engine == "mcwf":
        from .baselines import mcwf_baseline

        for idx in range(n_trajectories):
            records.append(mcwf_baseline(
                scheme, t_max, spawn_seed(base_seed, idx), trajectory_id=idx,
            ))
    else:
        raise ValueError(f"unknown engine {engine!r} (expected 'nrules' or 'mcwf')")
    return records
