"""Observables from emission records: bright/dark segmentation, waiting
times, two-exponential fits, and cross-ensemble comparisons.

Everything here is a pure function over immutable records (parallel-map
safe). Waiting times follow the reset-at-every-photon convention: each
photon of either channel starts a clock that stops at the next photon of
the requested channel, so intervals may overlap.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import AnalysisError, DegenerateFitError
from .records import Channel, EmissionRecord

BRIGHT = "bright"
DARK = "dark"

_EM_MAX_ITER = 200
_EM_TOL = 1e-9
_MIN_FIT_SAMPLES = 100


@dataclass(frozen=True)
class Period:
    kind: str
    start: float
    duration: float

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class PeriodSegmentation:
    """Alternating bright/dark periods tiling [0, t_max]."""

    periods: tuple
    t_max: float

    def __post_init__(self):
        t = 0.0
        prev_kind = None
        for p in self.periods:
            if p.kind not in (BRIGHT, DARK):
                raise ValueError(f"unknown period kind {p.kind!r}")
            if p.kind == prev_kind:
                raise ValueError("periods must alternate bright/dark")
            if abs(p.start - t) > 1e-9 * max(1.0, self.t_max):
                raise ValueError("periods must tile [0, t_max] without gaps")
            t = p.end
            prev_kind = p.kind
        if self.periods and abs(t - self.t_max) > 1e-9 * max(1.0, self.t_max):
            raise ValueError("periods must end at t_max")

    def of_kind(self, kind: str) -> list:
        return [p for p in self.periods if p.kind == kind]

    def durations(self, kind: str) -> np.ndarray:
        return np.array([p.duration for p in self.of_kind(kind)])


def segment_periods(record: EmissionRecord, gap_threshold: float) -> PeriodSegmentation:
    """Split [0, t_max] into bright runs of strong photons and dark gaps.

    A maximal run of strong emissions whose spacings stay below
    ``gap_threshold`` is bright; every spacing at or above the threshold —
    including the stretches before the first and after the last strong
    photon — is dark. Weak photons play no part in the segmentation.
    """
    if gap_threshold <= 0.0:
        raise AnalysisError("gap_threshold must be positive")
    t_max = record.t_max
    strong = record.channel_times(Channel.STRONG)
    if strong.size == 0:
        return PeriodSegmentation((Period(DARK, 0.0, t_max),), t_max)

    periods = []

    def push(kind, start, end):
        if end < start:
            raise AnalysisError("segmentation produced a negative duration")
        if end == start:
            # a photon sitting exactly on a period boundary (e.g. the last
            # event at t_max) contributes no bright interval of its own
            return
        if periods and periods[-1].kind == kind:
            prev = periods.pop()
            periods.append(Period(kind, prev.start, end - prev.start))
        else:
            periods.append(Period(kind, start, end - start))

    cursor = 0.0
    if strong[0] >= gap_threshold:
        push(DARK, 0.0, strong[0])
        cursor = strong[0]
    run_start = cursor
    last = strong[0]
    for t in strong[1:]:
        if t - last >= gap_threshold:
            push(BRIGHT, run_start, last)
            push(DARK, last, t)
            run_start = t
        last = t
    if t_max - last >= gap_threshold:
        push(BRIGHT, run_start, last)
        push(DARK, last, t_max)
    else:
        push(BRIGHT, run_start, t_max)
    return PeriodSegmentation(tuple(periods), t_max)


def waiting_times(record: EmissionRecord, channel: Channel) -> np.ndarray:
    """Durations from every photon (either kind resets) to the next photon
    of ``channel``. Fewer than two events yields an empty array."""
    if record.n_events < 2:
        return np.empty(0)
    times = record.times
    targets = record.channel_times(channel)
    idx = np.searchsorted(targets, times, side="right")
    has_next = idx < targets.size
    waits = targets[idx[has_next]] - times[has_next]
    return waits[waits > 0.0]


def pooled_waiting_times(records, channel: Channel) -> np.ndarray:
    parts = [waiting_times(r, channel) for r in records]
    parts = [p for p in parts if p.size]
    return np.concatenate(parts) if parts else np.empty(0)


def interarrival_times(record: EmissionRecord, channel: Channel) -> np.ndarray:
    """Spacings between consecutive photons of one channel."""
    t = record.channel_times(channel)
    return np.diff(t) if t.size > 1 else np.empty(0)


# ---------------------------------------------------------------------------
# Two-exponential mixture fit


@dataclass(frozen=True)
class FitResult:
    """Two-exponential mixture fit.

    ``weight`` is the probability mass of the slow component (referred back
    to t = 0 when the fit used a left-truncated window); ``goodness`` is
    the KS statistic of the fitted samples against the fitted density.
    """

    fast_rate: float
    slow_rate: float
    weight: float
    goodness: float
    n_samples: int
    t_min: float

    def __post_init__(self):
        if not (self.fast_rate > self.slow_rate > 0.0):
            raise ValueError("fit requires fast_rate > slow_rate > 0")


def _em_two_exp(y: np.ndarray):
    """EM for a two-exponential mixture on y >= 0.

    Returns (rate_fast, rate_slow, mass_fast) in the frame of y. Runs 200
    iterations or stops when the relative log-likelihood gain drops below
    1e-9.
    """
    y = np.asarray(y, float)
    n = y.size
    q75 = np.quantile(y, 0.75)
    q98 = np.quantile(y, 0.98)
    head = y[y <= q75]
    tail = y[y >= q98]
    r1 = 1.0 / max(head.mean(), 1e-300)
    tail_excess = tail.mean() - q98
    r2 = 1.0 / tail_excess if tail_excess > 0 else 0.1 * r1
    if r2 >= r1:
        r2 = 0.5 * r1
    w1 = 0.95

    ll_prev = -np.inf
    for _ in range(_EM_MAX_ITER):
        lf = math.log(w1) + math.log(r1) - r1 * y
        ls = math.log1p(-w1) + math.log(r2) - r2 * y
        m = np.maximum(lf, ls)
        ll = float(np.sum(m + np.log(np.exp(lf - m) + np.exp(ls - m))))
        with np.errstate(over="ignore"):
            g = 1.0 / (1.0 + np.exp(ls - lf))  # responsibility of component 1
        s1 = float(g.sum())
        s2 = n - s1
        if s1 <= 0.0 or s2 <= 0.0:
            raise DegenerateFitError(
                "one mixture component lost all samples; the data look "
                "single-exponential — widen the rate separation or add samples"
            )
        r1 = s1 / float(np.dot(g, y))
        r2 = s2 / float(np.dot(1.0 - g, y))
        w1 = s1 / n
        if ll_prev != -np.inf and abs(ll - ll_prev) <= _EM_TOL * abs(ll_prev):
            break
        ll_prev = ll
    if r1 < r2:
        r1, r2, w1 = r2, r1, 1.0 - w1
    return r1, r2, w1


def _mixture_cdf(rate_f, rate_s, mass_f):
    def cdf(x):
        x = np.asarray(x, float)
        return mass_f * (1.0 - np.exp(-rate_f * x)) \
            + (1.0 - mass_f) * (1.0 - np.exp(-rate_s * x))
    return cdf


def fit_waiting_distribution(samples) -> FitResult:
    """Maximum-likelihood two-exponential mixture via EM, in two passes.

    The first pass estimates the fast rate on the raw samples; the second
    re-fits on the left-truncated tail t >= 1.5 / fast_rate, where the
    distribution really is a two-exponential mixture (early times carry
    transients from the faster chain modes). Truncation is transparent for
    exponentials, and the reported weight is referred back to t = 0.
    """
    y = np.asarray(samples, float)
    y = y[np.isfinite(y) & (y > 0.0)]
    if y.size < _MIN_FIT_SAMPLES:
        raise AnalysisError(
            f"need at least {_MIN_FIT_SAMPLES} positive samples, got {y.size}"
        )
    r_fast0, _r_slow0, _m0 = _em_two_exp(y)
    t_min = 1.5 / r_fast0
    kept = y[y >= t_min] - t_min
    if kept.size < _MIN_FIT_SAMPLES:
        raise AnalysisError(
            "too few samples beyond the fast transient; the input does not "
            "span both timescales"
        )
    r_f, r_s, m_f = _em_two_exp(kept)
    if r_f < 2.0 * r_s:
        raise DegenerateFitError(
            f"fitted rates {r_f:.4g} and {r_s:.4g} are within a factor of 2; "
            "increase the timescale separation or supply more samples"
        )
    # refer the truncated-frame masses back to t = 0
    a_s = (1.0 - m_f) * math.exp(min(r_s * t_min, 700.0))
    a_f = m_f * math.exp(min(r_f * t_min, 700.0))
    weight = a_s / (a_s + a_f)
    ks = stats.kstest(kept, _mixture_cdf(r_f, r_s, m_f)).statistic
    return FitResult(fast_rate=r_f, slow_rate=r_s, weight=weight,
                     goodness=float(ks), n_samples=int(kept.size),
                     t_min=float(t_min))


# ---------------------------------------------------------------------------
# Dark-period statistics and cross-ensemble comparison


@dataclass(frozen=True)
class DarkStats:
    count: int
    mean_excess: float
    rate: float
    excesses: np.ndarray
    gap_threshold: float


def dark_statistics(records, gap_threshold: float) -> DarkStats:
    """Pool dark periods over an ensemble.

    Durations are reported as the excess over the detection threshold
    (memorylessness makes the excess of an exponential tail exponential
    with the same rate, so the threshold drops out of the mean). A dark
    period still open at t_max is censored and excluded.
    """
    excesses = []
    for record in records:
        seg = segment_periods(record, gap_threshold)
        darks = seg.of_kind(DARK)
        for p in darks:
            if p.end >= record.t_max:  # censored: never saw it end
                continue
            excesses.append(p.duration - gap_threshold)
    arr = np.array(excesses)
    arr = arr[arr >= 0.0]
    if arr.size == 0:
        return DarkStats(0, math.nan, math.nan, arr, gap_threshold)
    mean = float(arr.mean())
    return DarkStats(int(arr.size), mean, 1.0 / mean, arr, gap_threshold)


def exponential_ks(samples, rate: float):
    """KS test of samples against an exponential with the given rate."""
    if len(samples) == 0:
        raise AnalysisError("no samples for the exponential test")
    res = stats.kstest(np.asarray(samples, float), "expon", args=(0.0, 1.0 / rate))
    return float(res.statistic), float(res.pvalue)


def _stride_subsample(x: np.ndarray, max_samples: int) -> np.ndarray:
    if x.size <= max_samples:
        return x
    idx = np.floor(np.linspace(0, x.size - 1, max_samples)).astype(np.int64)
    return x[idx]


def _per_target_waits(record: EmissionRecord, channel: Channel) -> np.ndarray:
    """One waiting time per target photon (the earliest of each nest).

    Every photon between two ``channel`` photons waits for the same target,
    so those waits are nested rather than independent. A KS p-value computed
    from all of them would be wildly anticonservative for a rare channel;
    keeping the first wait of each nest restores an approximately
    independent sample.
    """
    if record.n_events < 2:
        return np.empty(0)
    times = record.times
    targets = record.channel_times(channel)
    idx = np.searchsorted(targets, times, side="right")
    has_next = idx < targets.size
    idx = idx[has_next]
    waits = targets[idx] - times[has_next]
    good = waits > 0.0
    idx, waits = idx[good], waits[good]
    _, first = np.unique(idx, return_index=True)
    return waits[first]


@dataclass(frozen=True)
class ChannelComparison:
    statistic: float
    pvalue: float
    n_a: int
    n_b: int


@dataclass(frozen=True)
class ComparisonReport:
    strong: ChannelComparison
    weak: ChannelComparison
    bright_mean_ratio: float
    dark_mean_ratio: float

    def min_pvalue(self) -> float:
        return min(self.strong.pvalue, self.weak.pvalue)


def compare_records(ensemble_a, ensemble_b, gap_threshold: float,
                    max_samples: int = 10_000) -> ComparisonReport:
    """Two-sample KS on waiting-time samples per channel, plus bright/dark
    mean-duration ratios (a over b).

    Waiting times that share a target photon are thinned to one per target
    first (see :func:`_per_target_waits`); subsampling above ``max_samples``
    then uses a fixed even stride. Both steps are deterministic, so an
    ensemble compared against itself yields a KS statistic of exactly 0.
    """
    if not ensemble_a or not ensemble_b:
        raise AnalysisError("cannot compare an empty ensemble")

    def channel_waits(ensemble, channel):
        parts = [_per_target_waits(r, channel) for r in ensemble]
        parts = [p for p in parts if p.size]
        pooled = np.concatenate(parts) if parts else np.empty(0)
        return _stride_subsample(pooled, max_samples)

    per_channel = {}
    for channel in (Channel.STRONG, Channel.WEAK):
        wa = channel_waits(ensemble_a, channel)
        wb = channel_waits(ensemble_b, channel)
        if wa.size == 0 or wb.size == 0:
            raise AnalysisError(
                f"no {channel.value}-channel waiting times on one side"
            )
        res = stats.ks_2samp(wa, wb, method="asymp")
        per_channel[channel] = ChannelComparison(
            statistic=float(res.statistic), pvalue=float(res.pvalue),
            n_a=int(wa.size), n_b=int(wb.size),
        )

    def mean_duration(ensemble, kind):
        durs = [segment_periods(r, gap_threshold).durations(kind) for r in ensemble]
        pooled = np.concatenate(durs) if durs else np.empty(0)
        return float(pooled.mean()) if pooled.size else math.nan

    bright_ratio = mean_duration(ensemble_a, BRIGHT) / mean_duration(ensemble_b, BRIGHT)
    dark_ratio = mean_duration(ensemble_a, DARK) / mean_duration(ensemble_b, DARK)
    return ComparisonReport(strong=per_channel[Channel.STRONG],
                            weak=per_channel[Channel.WEAK],
                            bright_mean_ratio=bright_ratio,
                            dark_mean_ratio=dark_ratio)


# ---------------------------------------------------------------------------
# Weak-photon placement relative to dark periods


@dataclass(frozen=True)
class OrderingStats:
    n_dark: int
    n_before: int
    n_after: int
    n_unclassified: int

    def fraction(self, side: str) -> float:
        classified = self.n_before + self.n_after
        if classified == 0:
            return math.nan
        if side == "before":
            return self.n_before / classified
        if side == "after":
            return self.n_after / classified
        raise ValueError(f"side must be 'before' or 'after', got {side!r}")


def weak_ordering(records, gap_threshold: float,
                  window: float | None = None) -> OrderingStats:
    """Which edge of each dark period its weak photon hugs.

    For every interior dark period, the weak photons inside it are matched
    to the nearer edge; a match counts only within ``window`` (default: the
    gap threshold) of that edge. Dark periods with no weak photon in reach
    stay unclassified.
    """
    if window is None:
        window = gap_threshold
    n_dark = n_before = n_after = n_unclassified = 0
    for record in records:
        seg = segment_periods(record, gap_threshold)
        weak = record.channel_times(Channel.WEAK)
        for p in seg.of_kind(DARK):
            if p.start <= 0.0 or p.end >= record.t_max:
                continue  # boundary darks have a missing edge
            n_dark += 1
            inside = weak[(weak >= p.start) & (weak <= p.end)]
            if inside.size == 0:
                n_unclassified += 1
                continue
            d_start = inside - p.start
            d_end = p.end - inside
            best = int(np.argmin(np.minimum(d_start, d_end)))
            if d_start[best] <= d_end[best] and d_start[best] <= window:
                n_before += 1
            elif d_end[best] < d_start[best] and d_end[best] <= window:
                n_after += 1
            else:
                n_unclassified += 1
    return OrderingStats(n_dark, n_before, n_after, n_unclassified)


# ---------------------------------------------------------------------------
# Plot-ready exports


def waiting_histogram(samples, n_bins: int = 60):
    """Log-spaced histogram (edges, counts) for plot-ready CSV export."""
    y = np.asarray(samples, float)
    y = y[y > 0.0]
    if y.size == 0:
        raise AnalysisError("no positive samples to histogram")
    lo, hi = float(y.min()), float(y.max())
    if hi <= lo:
        hi = lo * (1.0 + 1e-9) + 1e-12
    edges = np.geomspace(lo, hi, n_bins + 1)
    counts, _ = np.histogram(y, bins=edges)
    return edges, counts


def write_histogram_csv(path, edges, counts) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_left", "bin_right", "count"])
        for i, c in enumerate(counts):
            writer.writerow([repr(float(edges[i])), repr(float(edges[i + 1])), int(c)])


def segmentation_summary(records, gap_threshold: float) -> dict:
    """Ensemble-level bright/dark bookkeeping for the JSON report."""
    n_bright = n_dark = 0
    bright_total = dark_total = 0.0
    for record in records:
        seg = segment_periods(record, gap_threshold)
        b = seg.durations(BRIGHT)
        d = seg.durations(DARK)
        n_bright += b.size
        n_dark += d.size
        bright_total += float(b.sum())
        dark_total += float(d.sum())
    return {
        "gap_threshold": gap_threshold,
        "n_bright": n_bright,
        "n_dark": n_dark,
        "mean_bright": bright_total / n_bright if n_bright else None,
        "mean_dark": dark_total / n_dark if n_dark else None,
        "dark_fraction": dark_total / (bright_total + dark_total)
        if bright_total + dark_total > 0 else None,
    }
