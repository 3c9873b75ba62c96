"""Independent baselines the trajectory engine is validated against.

``telegraph_oracle`` predicts the two telegraph rates of the fluorescence
signal — the fast rate of the bright-period photon spacing and the slow
escape rate of dark periods — straight from the level structure by
eigendecomposition, with no trajectory sampling anywhere. ``mcwf_baseline``
is a conventional quantum-jump unraveling with norm-threshold jumps. Both
are deliberately separate code paths from :mod:`.engine`: agreement between
all three is the point, so none of them may share dynamics code.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.signal import fftconvolve

from ._rng import counter_uniform
from .errors import NumericError, OracleFitError
from .programs import configuration_graph
from .records import Channel, EmissionRecord
from .schemes import LevelScheme, scheme_hash

_N_LEVELS = 3
_MCWF_SALT = 0xA3C59AC2F1EEDB1D

# grid construction limits for the renewal route
_GRID_SPAN = 12.0      # lifetimes of the slowest mode covered
_GRID_MAX_POINTS = 4_000_000
_SUPPORT_EPS = 1e-12


@dataclass(frozen=True)
class TelegraphParams:
    """Random-telegraph description of the fluorescence signal.

    The bright-period photon spacing decays at rate ``beta1 / 2``; dark
    periods end at rate ``lambda2``; ``weight`` is the probability mass of
    the slow component in the photon-spacing distribution.
    """

    beta1: float
    lambda2: float
    weight: float

    def __post_init__(self):
        if not (self.lambda2 > 0.0):
            raise OracleFitError(f"slow rate must be positive, got {self.lambda2}")
        if not (0.5 * self.beta1 > self.lambda2):
            raise OracleFitError(
                f"fast rate {0.5 * self.beta1:.4g} must exceed slow rate "
                f"{self.lambda2:.4g}; increase the timescale separation"
            )
        if not (0.0 < self.weight < 1.0):
            raise OracleFitError(f"slow weight must lie in (0, 1), got {self.weight}")


def oracle_filename(scheme: LevelScheme) -> str:
    return f"oracle_{scheme_hash(scheme)}.json"


def save_oracle(params: TelegraphParams, path) -> None:
    payload = {"beta1": params.beta1, "lambda2": params.lambda2,
               "weight": params.weight}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_oracle(path) -> TelegraphParams:
    with open(path) as fh:
        payload = json.load(fh)
    return TelegraphParams(beta1=float(payload["beta1"]),
                           lambda2=float(payload["lambda2"]),
                           weight=float(payload["weight"]))


# ---------------------------------------------------------------------------
# Eigenmode machinery


def _chain_matrix(graph) -> np.ndarray:
    """Non-Hermitian 3x3 chain generator: drives on the off-diagonal,
    half the total decay rate as an imaginary drain on the diagonal."""
    h = np.zeros((_N_LEVELS, _N_LEVELS), np.complex128)
    for d in graph.drives:
        h[d.lower, d.upper] += 0.5 * d.omega
        h[d.upper, d.lower] += 0.5 * d.omega
    for dec in graph.decays:
        h[dec.src, dec.src] -= 0.5j * dec.rate
    return h


def _modes(h: np.ndarray, start_level: int, src_level: int):
    """c_src(t) = sum_k a_k exp(-i lam_k t) for evolution from e_start."""
    lam, vecs = np.linalg.eig(h)
    w = np.linalg.solve(vecs, np.eye(_N_LEVELS, dtype=np.complex128)[:, start_level])
    return lam, vecs[src_level, :] * w


def _pair_terms(lam, a):
    """|c_src(t)|^2 = sum over pairs of coef * exp(-(rate + i osc) t)."""
    terms = []
    for k in range(len(lam)):
        for l in range(len(lam)):
            coef = a[k] * np.conj(a[l])
            rate = -(lam[k].imag + lam[l].imag)
            osc = lam[k].real - lam[l].real
            terms.append((rate, osc, coef))
    return terms


def _supported_rates(terms):
    """Decay rates that actually carry probability mass, slow to fast."""
    masses = {}
    for rate, osc, coef in terms:
        if rate <= 0.0:
            continue
        mass = (coef / complex(rate, osc)).real
        key = round(math.log(rate) * 1e9)
        masses[key] = (rate, masses.get(key, (rate, 0.0))[1] + mass)
    out = [(rate, mass) for rate, mass in masses.values() if abs(mass) > _SUPPORT_EPS]
    out.sort()
    return out


def _density_on_grid(lam, a, t):
    c = np.exp(np.outer(-1j * lam, t))
    src = a @ c
    return src.real**2 + src.imag**2


# ---------------------------------------------------------------------------
# Renewal composition and slow-tail extraction


def _channel_decays(graph):
    chans = {}
    for dec in graph.decays:
        chans[dec.channel] = dec
    if Channel.STRONG not in chans or Channel.WEAK not in chans:
        raise OracleFitError("oracle needs one decay per channel")
    return chans


def _log_linear(t, y):
    """Least-squares line through ln(y); returns (amplitude, rate)."""
    ln = np.log(y)
    slope, intercept = np.polyfit(t, ln, 1)
    return math.exp(intercept), -slope


def _tail_fit(t, y, r_slow, r_fast, frac_slow):
    """Log-tail least squares for the slow exponential of a density.

    The slowest contaminant of the tail is the cross term at the mean of
    the two rates, so the window opens once that term has decayed seven
    e-foldings below the slow one; a line through ln y then recovers
    amplitude and rate in one shot. The renewal composition drags the tail
    pole below the bare mode rate by roughly the slow mass fraction, so the
    spectrum cross-check widens with ``frac_slow``.
    """
    lo = max(14.0 / (r_fast - r_slow), 5.0 / r_fast)
    win = (t >= lo) & (y > 0.0)
    if np.count_nonzero(win) < 30:
        raise OracleFitError("slow-rate window too small for a stable fit")
    amp, rate = _log_linear(t[win], y[win])
    if rate <= 0.0:
        raise OracleFitError("slow-rate fit did not converge")
    if abs(rate - r_slow) > (0.02 + 2.0 * frac_slow) * r_slow:
        raise OracleFitError(
            f"slow-rate fit {rate:.3e} disagrees with the mode spectrum "
            f"{r_slow:.3e}"
        )
    return amp, rate


def telegraph_oracle(scheme: LevelScheme) -> TelegraphParams:
    """Predict the telegraph rates by eigendecomposition plus renewal.

    Route: diagonalize the chain generator once per starting level; the
    next-photon densities are then closed-form sums of damped exponentials,
    and the photon-spacing distribution follows by renewal composition (a
    weak photon restarts the clock from the weak decay's landing level).
    The fast rate is the second-slowest mode rate of the spectrum; the slow
    rate and the slow component's weight come from a log-tail least-squares
    fit of the composed distribution, cross-checked against the spectrum.
    (A two-window peel is biased here: the density carries a cross term at
    the mean of the two rates that contaminates any early fast window, so
    the fast exponent is read off the spectrum instead.)  No trajectory is
    ever sampled.
    """
    graph = configuration_graph(scheme)
    h = _chain_matrix(graph)
    chans = _channel_decays(graph)
    dec_s = chans[Channel.STRONG]
    dec_w = chans[Channel.WEAK]

    start_levels = sorted({dec_s.dst, dec_w.dst})
    modes = {
        lvl: {
            "s": _modes(h, lvl, dec_s.src),
            "w": _modes(h, lvl, dec_w.src),
        }
        for lvl in start_levels
    }

    # mode spectrum of the chain: the slowest self-rate is the shelving
    # rate, the next one the fluorescence-return rate
    lam, a_s = modes[dec_s.dst]["s"]
    r_self = np.sort(-2.0 * lam.imag)
    if r_self[0] <= 1e-12 * max(1.0, float(r_self[-1])):
        raise OracleFitError(
            "slowest mode carries no decay (trapped superposition); "
            "dark periods never end"
        )
    r_slow = float(r_self[0])
    r_fast = float(r_self[1])
    if r_fast / r_slow < 4.0:
        raise OracleFitError(
            f"fast/slow rate ratio {r_fast / r_slow:.2f} below 4; "
            "increase the timescale separation"
        )

    terms = _pair_terms(lam, a_s)
    supported = _supported_rates(terms)
    if not supported:
        raise OracleFitError("no decay mode carries mass")

    osc_max = max(abs(osc) for _r, osc, _c in terms)
    r_max = max(r for r, _m in supported)
    t_end = _GRID_SPAN / r_slow
    dt = 0.1 / max(r_max, osc_max, 10.0 / t_end)
    n = int(t_end / dt) + 1

    if n > _GRID_MAX_POINTS:
        return _exclusive_only_params(supported, r_slow, r_fast)

    t = np.arange(n) * dt
    dens = {}
    for lvl in start_levels:
        lam_l, a_sl = modes[lvl]["s"]
        _, a_wl = modes[lvl]["w"]
        dens[lvl] = (
            dec_s.rate * _density_on_grid(lam_l, a_sl, t),
            dec_w.rate * _density_on_grid(lam_l, a_wl, t),
        )

    # renewal fixed point: a weak photon at tau restarts from its landing
    # level, so W_l = f_s,l + f_w,l * W_{weak destination}
    wait = {lvl: dens[lvl][0].copy() for lvl in start_levels}
    for _ in range(64):
        prev_tail = wait[dec_s.dst][-1]
        updated = {}
        for lvl in start_levels:
            conv = fftconvolve(dens[lvl][1], wait[dec_w.dst])[:n] * dt
            updated[lvl] = dens[lvl][0] + conv
        wait = updated
        if abs(wait[dec_s.dst][-1] - prev_tail) <= 1e-16 + 1e-9 * abs(prev_tail):
            break

    # pool over restart levels by how often each one starts a spacing
    q_w = {lvl: float(np.trapezoid(dens[lvl][1], t)) for lvl in start_levels}
    q_dw = min(q_w[dec_w.dst], 1.0 - 1e-15)
    weak_per_cycle = q_w[dec_s.dst] * (1.0 + q_dw / (1.0 - q_dw))
    pooled = (wait[dec_s.dst] + weak_per_cycle * wait[dec_w.dst]) / (1.0 + weak_per_cycle)

    slow_mass_spec = sum(m for r, m in supported if r < 2.0 * r_slow)
    total_mass_spec = sum(m for _r, m in supported)
    frac_slow = min(max(slow_mass_spec / total_mass_spec, 0.0), 1.0)

    amp_s, r_s = _tail_fit(t, pooled, r_slow, r_fast, frac_slow)
    mass_slow = amp_s / r_s
    mass_total = float(np.trapezoid(pooled, t)) + amp_s * math.exp(-r_s * t[-1]) / r_s
    weight = min(max(mass_slow / mass_total, 1e-300), 1.0 - 1e-12)
    return TelegraphParams(beta1=2.0 * r_fast, lambda2=r_s, weight=weight)


def _exclusive_only_params(supported, r_slow, r_fast) -> TelegraphParams:
    """Fallback when the timescale spread makes a shared grid infeasible.

    The weak channel is negligible in exactly this regime, so the exclusive
    strong density stands in for the full spacing distribution and the slow
    weight is read off the supported mode masses.
    """
    slow_mass = sum(m for r, m in supported if r < 2.0 * r_slow)
    total = sum(m for _r, m in supported)
    weight = min(max(slow_mass / total, 1e-300), 1.0 - 1e-12)
    return TelegraphParams(beta1=2.0 * r_fast, lambda2=r_slow, weight=weight)


# ---------------------------------------------------------------------------
# Conventional quantum-jump baseline


@njit(cache=True)
def _mcwf_advance(h01, h02, h12, g0, g1, g2, n_dec, dec_src, dec_dst,
                  dec_rate, dec_chan, dt0, t_max, seed, sf8, si8, ev_t, ev_c):
    t = sf8[0]
    c0 = complex(sf8[1], sf8[2])
    c1 = complex(sf8[3], sf8[4])
    c2 = complex(sf8[5], sf8[6])
    r_target = sf8[7]
    jumps = si8[0]
    steps = si8[1]
    n_events = si8[2]
    cap = ev_t.shape[0]
    status = 0

    while t < t_max:
        if n_events >= cap:
            status = 1
            break
        dt = dt0
        if t_max - t < dt:
            dt = t_max - t
        if dt <= 0.0:
            break
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
        c0 = c0 + dt6 * (k1_0 + 2.0 * k2_0 + 2.0 * k3_0 + k4_0)
        c1 = c1 + dt6 * (k1_1 + 2.0 * k2_1 + 2.0 * k3_1 + k4_1)
        c2 = c2 + dt6 * (k1_2 + 2.0 * k2_2 + 2.0 * k3_2 + k4_2)
        t = t + dt
        steps += 1

        norm2 = (c0.real * c0.real + c0.imag * c0.imag
                 + c1.real * c1.real + c1.imag * c1.imag) \
            + (c2.real * c2.real + c2.imag * c2.imag)
        if not np.isfinite(norm2):
            status = 3
            break
        if norm2 >= r_target:
            continue

        # jump: channel picked proportional to its instantaneous flux
        wsum = 0.0
        for k in range(n_dec):
            src = dec_src[k]
            if src == 0:
                mod = c0.real * c0.real + c0.imag * c0.imag
            elif src == 1:
                mod = c1.real * c1.real + c1.imag * c1.imag
            else:
                mod = c2.real * c2.real + c2.imag * c2.imag
            wsum += dec_rate[k] * mod
        if wsum <= 0.0:
            status = 3
            break
        pick = counter_uniform(seed, np.uint64(jumps), np.uint64(1)) * wsum
        acc = 0.0
        chosen = n_dec - 1
        for k in range(n_dec):
            src = dec_src[k]
            if src == 0:
                mod = c0.real * c0.real + c0.imag * c0.imag
            elif src == 1:
                mod = c1.real * c1.real + c1.imag * c1.imag
            else:
                mod = c2.real * c2.real + c2.imag * c2.imag
            acc += dec_rate[k] * mod
            if pick < acc:
                chosen = k
                break
        ev_t[n_events] = t
        ev_c[n_events] = dec_chan[chosen]
        n_events += 1
        dst = dec_dst[chosen]
        c0 = complex(1.0, 0.0) if dst == 0 else complex(0.0, 0.0)
        c1 = complex(1.0, 0.0) if dst == 1 else complex(0.0, 0.0)
        c2 = complex(1.0, 0.0) if dst == 2 else complex(0.0, 0.0)
        jumps += 1
        r_target = counter_uniform(seed, np.uint64(jumps), np.uint64(0))

    sf8[0] = t
    sf8[1] = c0.real
    sf8[2] = c0.imag
    sf8[3] = c1.real
    sf8[4] = c1.imag
    sf8[5] = c2.real
    sf8[6] = c2.imag
    sf8[7] = r_target
    si8[0] = jumps
    si8[1] = steps
    si8[2] = n_events
    return status


def mcwf_baseline(scheme: LevelScheme, t_max: float, seed: int,
                  trajectory_id: int = 0,
                  event_capacity: int = 1 << 16) -> EmissionRecord:
    """Norm-threshold quantum-jump trajectory on the untruncated chain.

    Fixed-step non-Hermitian integration; a jump fires when the squared
    norm crosses a pre-drawn uniform threshold, the channel is drawn
    proportional to its flux, and the state resets to the decay's landing
    level. Photon-number bookkeeping is deliberately absent — this is the
    conventional picture the engine is compared against.
    """
    if t_max < 0.0:
        raise ValueError("t_max must be nonnegative")
    graph = configuration_graph(scheme)
    h = _chain_matrix(graph)
    h01 = h[0, 1].real
    h02 = h[0, 2].real
    h12 = h[1, 2].real
    g0 = -2.0 * h[0, 0].imag
    g1 = -2.0 * h[1, 1].imag
    g2 = -2.0 * h[2, 2].imag

    decays = graph.decays
    n_dec = len(decays)
    dec_src = np.array([d.src for d in decays], np.int64)
    dec_dst = np.array([d.dst for d in decays], np.int64)
    dec_rate = np.array([d.rate for d in decays], np.float64)
    dec_chan = np.array([d.channel.code for d in decays], np.int64)

    total_rate = float(dec_rate.sum()) if n_dec else 0.0
    if t_max == 0.0 or total_rate == 0.0:
        return EmissionRecord(trajectory_id, t_max)

    omega_max = max((d.omega for d in graph.drives), default=0.0)
    dt0 = 0.05 / max(dec_rate.max(), 1e-300)
    if omega_max > 0.0:
        dt0 = min(dt0, 2.0 * math.pi / (50.0 * omega_max))

    mixed_seed = np.uint64(seed) ^ np.uint64(_MCWF_SALT)
    sf8 = np.zeros(8, np.float64)
    rest = graph.rest_level
    sf8[1 + 2 * rest] = 1.0
    sf8[7] = counter_uniform(mixed_seed, np.uint64(0), np.uint64(0))
    si8 = np.zeros(3, np.int64)
    ev_t = np.empty(event_capacity, np.float64)
    ev_c = np.empty(event_capacity, np.int64)
    times = []
    chans = []
    while True:
        status = _mcwf_advance(h01, h02, h12, g0, g1, g2, n_dec, dec_src,
                               dec_dst, dec_rate, dec_chan, dt0, float(t_max),
                               mixed_seed, sf8, si8, ev_t, ev_c)
        n = int(si8[2])
        if n:
            times.append(ev_t[:n].copy())
            chans.append(ev_c[:n].copy())
            si8[2] = 0
        if status == 1:
            continue
        if status == 3:
            raise NumericError("quantum-jump integration went non-finite")
        break
    all_t = np.concatenate(times) if times else np.empty(0)
    all_c = np.concatenate(chans) if chans else np.empty(0, np.int64)
    return EmissionRecord(trajectory_id, t_max, all_t, all_c.astype(np.int8))
