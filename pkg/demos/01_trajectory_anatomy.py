"""
Anatomy of a single stochastic trajectory
=========================================

Walk one trajectory by hand: build a level scheme, look at the component
scope the model program spans, advance the wave with explicit steps, watch
probability current feed the ready sinks, and fire a collapse.
"""

import numpy as np

from shelvesim import (
    Channel,
    build_configuration,
    collapse,
    compute_currents,
    desk_scheme,
    dump_scope,
    launch_state,
    run_trajectory,
    sample_trigger,
    step,
)
from shelvesim.engine import StepRng

# The desk scheme is a V configuration: a strong and a weak transition
# sharing the ground level. Immediate onset keeps the scope small enough
# to print in full.
scheme = desk_scheme(rabi_onset="immediate")
program = build_configuration(scheme)

# Every realized component plus the ready components it feeds, with the
# edges between them. Ready components have no outgoing edges: they hold
# whatever flows in but cannot evolve or pass it on.
state = launch_state(program, program.initial_anchor(), seed=12)
print(dump_scope(state.scope()))

# Advance the Schrödinger part in small steps. The realized slots carry
# complex amplitudes; each ready sink accumulates probability q fed by
# the current across its edge.
dt = 0.05
for _ in range(200):
    state, _ = step(state, dt)

report = compute_currents(state)
print("time      :", state.time)
print("norm s    :", state.s)
print("currents  :", np.round(report.currents, 6))
print("fed q     :", np.round(state.q, 6))

# Collapse is a Bernoulli draw per step with probability J * dt / s,
# evaluated on the midpoint currents that step() reports. The draws are
# keyed (seed, step index), so the whole walk is reproducible.
while True:
    rng = StepRng(state.seed, state.step_index)
    state, report = step(state, dt)
    chosen = sample_trigger(report, report.s_live, dt, rng)
    if chosen is not None:
        break

state = collapse(state, chosen)
print("collapse at t =", state.time)
print("norm after    :", state.s)          # exactly 1.0 again
print("emissions     :", state.events)     # (time, Channel) pairs

# The production entry point does all of the above (with adaptive steps)
# and returns an emission record per trajectory. Weak photons are rare by
# construction — the weak transition fires once per ~10^4 strong photons,
# which is what makes the dark periods of the next demo worth hunting.
record = run_trajectory(scheme, t_max=2000.0, seed=12)
print("trajectory emitted", record.n_events, "photons in 2000 time units")
print("first five        :", np.round(record.times[:5], 3))
print("weak photons      :", record.counts()[Channel.WEAK])
