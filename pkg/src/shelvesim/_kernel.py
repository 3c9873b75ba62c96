"""Compiled trajectory loop.

Mirrors :mod:`.engine`'s reference step move for move — same derivative
expressions, same evaluation order, same draw indices — so that a given
(program, seed) pair yields the same emission record on either path. The
scope graph is consumed in the flattened table form produced by
:func:`shelvesim.programs.compile_tables`.

State persists across calls in two small arrays so the caller can drain a
full event buffer and resume mid-trajectory.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._rng import counter_uniform
from .errors import NumericError
from .programs import compile_tables
from .records import EmissionRecord

STATUS_DONE = 0
STATUS_BUFFER_FULL = 1
STATUS_STEP_BUDGET = 2
STATUS_NUMERIC = 3
STATUS_NO_SCOPE = 4

# sf8 layout: t, max_drift, c0r, c0i, c1r, c1i, c2r, c2i, q0, q1, q2, q3
_SF8_LEN = 12
# si8 layout: scope_id, strong_absorbed, weak_absorbed, steps, n_events,
#             collapses, terminated
_SI8_LEN = 7

_TRIGGER_CAP = 0.1


@njit(cache=True)
def _advance(h, loss, n_sinks, sink_src, sink_rate, sink_emit, sink_chan,
             sink_level, sink_ds, sink_dw, terminal, dt_num, lookup,
             n_strong, n_weak, t_max, seed, target_p, max_dt, max_steps,
             sf8, si8, ev_t, ev_c):
    t = sf8[0]
    drift = sf8[1]
    c0 = complex(sf8[2], sf8[3])
    c1 = complex(sf8[4], sf8[5])
    c2 = complex(sf8[6], sf8[7])
    q0 = sf8[8]
    q1 = sf8[9]
    q2 = sf8[10]
    q3 = sf8[11]
    sid = si8[0]
    sabs = si8[1]
    wabs = si8[2]
    steps = si8[3]
    n_events = si8[4]
    collapses = si8[5]
    cap = ev_t.shape[0]
    status = STATUS_DONE

    while True:
        if terminal[sid] == 1:
            si8[6] = 1
            break
        if t >= t_max:
            break
        if steps >= max_steps:
            status = STATUS_STEP_BUDGET
            break
        if n_events >= cap:
            status = STATUS_BUFFER_FULL
            break

        h01 = h[sid, 0]
        h02 = h[sid, 1]
        h12 = h[sid, 2]
        g0 = loss[sid, 0]
        g1 = loss[sid, 1]
        g2 = loss[sid, 2]
        nk = n_sinks[sid]

        s_live = (c0.real * c0.real + c0.imag * c0.imag
                  + c1.real * c1.real + c1.imag * c1.imag) \
            + (c2.real * c2.real + c2.imag * c2.imag)
        if not np.isfinite(s_live):
            status = STATUS_NUMERIC
            break

        # step-size policy, mirroring engine.policy_dt
        dt = dt_num[sid]
        if max_dt > 0.0 and max_dt < dt:
            dt = max_dt
        hazard = 0.0
        for k in range(nk):
            src = sink_src[sid, k]
            if src == 0:
                mod = c0.real * c0.real + c0.imag * c0.imag
            elif src == 1:
                mod = c1.real * c1.real + c1.imag * c1.imag
            else:
                mod = c2.real * c2.real + c2.imag * c2.imag
            hazard += sink_rate[sid, k] * mod
        if hazard > 0.0:
            cand = target_p * s_live / hazard
            if cand < dt:
                dt = cand
        if t_max - t < dt:
            dt = t_max - t
        if dt <= 0.0:
            break

        # RK4 with defensive halving when a trigger probability overshoots
        tries = 0
        while True:
            hdt = 0.5 * dt
            dt6 = dt / 6.0

            k1_0 = -1j * (h01 * c1 + h02 * c2) - 0.5 * g0 * c0
            k1_1 = -1j * (h01 * c0 + h12 * c2) - 0.5 * g1 * c1
            k1_2 = -1j * (h02 * c0 + h12 * c1) - 0.5 * g2 * c2

            a0 = c0 + hdt * k1_0
            a1 = c1 + hdt * k1_1
            a2 = c2 + hdt * k1_2
            k2_0 = -1j * (h01 * a1 + h02 * a2) - 0.5 * g0 * a0
            k2_1 = -1j * (h01 * a0 + h12 * a2) - 0.5 * g1 * a1
            k2_2 = -1j * (h02 * a0 + h12 * a1) - 0.5 * g2 * a2

            m0 = c0 + hdt * k2_0
            m1 = c1 + hdt * k2_1
            m2 = c2 + hdt * k2_2
            k3_0 = -1j * (h01 * m1 + h02 * m2) - 0.5 * g0 * m0
            k3_1 = -1j * (h01 * m0 + h12 * m2) - 0.5 * g1 * m1
            k3_2 = -1j * (h02 * m0 + h12 * m1) - 0.5 * g2 * m2

            e0 = c0 + dt * k3_0
            e1 = c1 + dt * k3_1
            e2 = c2 + dt * k3_2
            k4_0 = -1j * (h01 * e1 + h02 * e2) - 0.5 * g0 * e0
            k4_1 = -1j * (h01 * e0 + h12 * e2) - 0.5 * g1 * e1
            k4_2 = -1j * (h02 * e0 + h12 * e1) - 0.5 * g2 * e2

            n0 = c0 + dt6 * (k1_0 + 2.0 * k2_0 + 2.0 * k3_0 + k4_0)
            n1 = c1 + dt6 * (k1_1 + 2.0 * k2_1 + 2.0 * k3_1 + k4_1)
            n2 = c2 + dt6 * (k1_2 + 2.0 * k2_2 + 2.0 * k3_2 + k4_2)

            s_mid = (m0.real * m0.real + m0.imag * m0.imag
                     + m1.real * m1.real + m1.imag * m1.imag) \
                + (m2.real * m2.real + m2.imag * m2.imag)

            jmax = 0.0
            for k in range(nk):
                src = sink_src[sid, k]
                if src == 0:
                    mod = m0.real * m0.real + m0.imag * m0.imag
                elif src == 1:
                    mod = m1.real * m1.real + m1.imag * m1.imag
                else:
                    mod = m2.real * m2.real + m2.imag * m2.imag
                jk = sink_rate[sid, k] * mod
                if jk > jmax:
                    jmax = jk
            if nk == 0 or s_mid <= 0.0 or jmax * dt / s_mid <= _TRIGGER_CAP:
                break
            dt = 0.5 * dt
            tries += 1
            if tries > 60:
                status = STATUS_NUMERIC
                break
        if status != STATUS_DONE:
            break

        s_before = (c0.real * c0.real + c0.imag * c0.imag
                    + c1.real * c1.real + c1.imag * c1.imag) \
            + (c2.real * c2.real + c2.imag * c2.imag)
        s_after = (n0.real * n0.real + n0.imag * n0.imag
                   + n1.real * n1.real + n1.imag * n1.imag) \
            + (n2.real * n2.real + n2.imag * n2.imag)
        if not np.isfinite(s_after):
            status = STATUS_NUMERIC
            break

        # currents at the midpoint and conservation weights (Simpson rule)
        j0 = 0.0
        j1 = 0.0
        j2 = 0.0
        j3 = 0.0
        w0 = 0.0
        w1 = 0.0
        w2 = 0.0
        w3 = 0.0
        for k in range(nk):
            src = sink_src[sid, k]
            if src == 0:
                mid_mod = m0.real * m0.real + m0.imag * m0.imag
                start_mod = c0.real * c0.real + c0.imag * c0.imag
                end_mod = n0.real * n0.real + n0.imag * n0.imag
            elif src == 1:
                mid_mod = m1.real * m1.real + m1.imag * m1.imag
                start_mod = c1.real * c1.real + c1.imag * c1.imag
                end_mod = n1.real * n1.real + n1.imag * n1.imag
            else:
                mid_mod = m2.real * m2.real + m2.imag * m2.imag
                start_mod = c2.real * c2.real + c2.imag * c2.imag
                end_mod = n2.real * n2.real + n2.imag * n2.imag
            jk = sink_rate[sid, k] * mid_mod
            wk = sink_rate[sid, k] * (start_mod + 4.0 * mid_mod + end_mod)
            if k == 0:
                j0 = jk
                w0 = wk
            elif k == 1:
                j1 = jk
                w1 = wk
            elif k == 2:
                j2 = jk
                w2 = wk
            else:
                j3 = jk
                w3 = wk

        lost = s_before - s_after
        wsum = w0 + w1 + w2 + w3
        nq0 = q0
        nq1 = q1
        nq2 = q2
        nq3 = q3
        if wsum > 0.0 and lost > 0.0:
            nq0 = q0 + lost * (w0 / wsum)
            if nk > 1:
                nq1 = q1 + lost * (w1 / wsum)
            if nk > 2:
                nq2 = q2 + lost * (w2 / wsum)
            if nk > 3:
                nq3 = q3 + lost * (w3 / wsum)

        s_total_before = s_before + (q0 + q1 + q2 + q3)
        s_total_after = s_after + (nq0 + nq1 + nq2 + nq3)
        d1 = abs(s_total_after - 1.0)
        d2 = abs(s_total_after - s_total_before)
        d = d1 if d1 > d2 else d2
        if d > drift:
            drift = d

        # independent Bernoulli trigger per sink, keyed by the step counter
        dts = dt / s_mid
        n_fired = 0
        first = -1
        second = -1
        third = -1
        fourth = -1
        for k in range(nk):
            if k == 0:
                jk = j0
            elif k == 1:
                jk = j1
            elif k == 2:
                jk = j2
            else:
                jk = j3
            if counter_uniform(seed, np.uint64(steps), np.uint64(k)) < jk * dts:
                if n_fired == 0:
                    first = k
                elif n_fired == 1:
                    second = k
                elif n_fired == 2:
                    third = k
                else:
                    fourth = k
                n_fired += 1

        chosen = -1
        if n_fired == 1:
            chosen = first
        elif n_fired > 1:
            wsel = 0.0
            for idx in range(n_fired):
                if idx == 0:
                    k = first
                elif idx == 1:
                    k = second
                elif idx == 2:
                    k = third
                else:
                    k = fourth
                if k == 0:
                    wsel += j0
                elif k == 1:
                    wsel += j1
                elif k == 2:
                    wsel += j2
                else:
                    wsel += j3
            pick = counter_uniform(seed, np.uint64(steps), np.uint64(nk)) * wsel
            acc = 0.0
            for idx in range(n_fired):
                if idx == 0:
                    k = first
                elif idx == 1:
                    k = second
                elif idx == 2:
                    k = third
                else:
                    k = fourth
                if k == 0:
                    acc += j0
                elif k == 1:
                    acc += j1
                elif k == 2:
                    acc += j2
                else:
                    acc += j3
                if pick < acc or idx == n_fired - 1:
                    chosen = k
                    break

        t = t + dt
        steps += 1

        if chosen < 0:
            c0 = n0
            c1 = n1
            c2 = n2
            q0 = nq0
            q1 = nq1
            q2 = nq2
            q3 = nq3
            continue

        # collapse: realize the chosen sink, relaunch around its label
        collapses += 1
        if sink_emit[sid, chosen] == 1:
            ev_t[n_events] = t
            ev_c[n_events] = sink_chan[sid, chosen]
            n_events += 1
        sabs += sink_ds[sid, chosen]
        wabs += sink_dw[sid, chosen]
        new_level = sink_level[sid, chosen]
        s_on = 1 if sabs < n_strong else 0
        w_on = 1 if wabs < n_weak else 0
        sid = lookup[new_level, s_on, w_on]
        if sid < 0:
            status = STATUS_NO_SCOPE
            break
        c0 = complex(1.0, 0.0)
        c1 = complex(0.0, 0.0)
        c2 = complex(0.0, 0.0)
        q0 = 0.0
        q1 = 0.0
        q2 = 0.0
        q3 = 0.0

    sf8[0] = t
    sf8[1] = drift
    sf8[2] = c0.real
    sf8[3] = c0.imag
    sf8[4] = c1.real
    sf8[5] = c1.imag
    sf8[6] = c2.real
    sf8[7] = c2.imag
    sf8[8] = q0
    sf8[9] = q1
    sf8[10] = q2
    sf8[11] = q3
    si8[0] = sid
    si8[1] = sabs
    si8[2] = wabs
    si8[3] = steps
    si8[4] = n_events
    si8[5] = collapses
    return status


def _tables_for(program):
    tables = getattr(program, "_kernel_tables", None)
    if tables is None:
        tables = compile_tables(program)
        program._kernel_tables = tables
    return tables


def run_compiled_trajectory(program, t_max, seed, target_p=0.02, max_dt=None,
                            trajectory_id=0, max_steps=2_000_000_000,
                            event_capacity=1 << 16):
    """Drive the compiled loop to t_max, draining the event buffer as needed."""
    from .engine import TrajectoryStats
    from .components import BasisLabel

    tb = _tables_for(program)
    scheme = program.scheme
    sf8 = np.zeros(_SF8_LEN, np.float64)
    sf8[2] = 1.0  # c0 = 1 exactly
    si8 = np.zeros(_SI8_LEN, np.int64)
    start = tb.lookup[tb.initial_level,
                      int(0 < scheme.n_strong_photons),
                      int(0 < scheme.n_weak_photons)]
    si8[0] = start
    ev_t = np.empty(event_capacity, np.float64)
    ev_c = np.empty(event_capacity, np.int64)
    times = []
    chans = []
    while True:
        status = _advance(
            tb.h, tb.loss, tb.n_sinks, tb.sink_src, tb.sink_rate, tb.sink_emit,
            tb.sink_chan, tb.sink_level, tb.sink_ds, tb.sink_dw, tb.terminal,
            tb.dt_num, tb.lookup,
            scheme.n_strong_photons, scheme.n_weak_photons,
            float(t_max), np.uint64(seed), float(target_p),
            float(max_dt) if max_dt is not None else 0.0,
            max_steps, sf8, si8, ev_t, ev_c,
        )
        n = int(si8[4])
        if n:
            times.append(ev_t[:n].copy())
            chans.append(ev_c[:n].copy())
            si8[4] = 0
        if status == STATUS_BUFFER_FULL:
            continue
        if status == STATUS_STEP_BUDGET:
            raise NumericError(
                f"exceeded {max_steps} steps before reaching t_max={t_max}")
        if status == STATUS_NUMERIC:
            raise NumericError("non-finite amplitude during integration")
        if status == STATUS_NO_SCOPE:
            raise NumericError("collapse target has no compiled scope")
        break

    all_t = np.concatenate(times) if times else np.empty(0)
    all_c = np.concatenate(chans) if chans else np.empty(0, np.int64)
    record = EmissionRecord(trajectory_id, t_max, all_t, all_c.astype(np.int8))
    anchor_level = tb.keys[int(si8[0])][0]
    stats = TrajectoryStats(
        steps=int(si8[3]),
        collapses=int(si8[5]),
        max_drift=float(sf8[1]),
        final_time=float(sf8[0]),
        final_anchor=BasisLabel(anchor_level, int(si8[1]), int(si8[2])),
        terminated=bool(si8[6]),
    )
    return record, stats
