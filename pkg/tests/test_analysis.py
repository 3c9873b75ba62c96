"""Segmentation, waiting times, mixture fits, and ordering statistics."""

import csv

import numpy as np
import pytest

from shelvesim import Channel, desk_scheme
from shelvesim.analysis import (
    BRIGHT,
    DARK,
    PeriodSegmentation,
    compare_records,
    dark_statistics,
    exponential_ks,
    fit_waiting_distribution,
    interarrival_times,
    pooled_waiting_times,
    segment_periods,
    segmentation_summary,
    waiting_histogram,
    waiting_times,
    weak_ordering,
    write_histogram_csv,
    _per_target_waits,
)
from shelvesim.errors import AnalysisError, DegenerateFitError
from shelvesim.records import EmissionRecord


def _rec(times, channels, t_max):
    return EmissionRecord(0, t_max, np.asarray(times, float),
                          np.asarray(channels, np.int8))


# ---------------------------------------------------------------------------
# segmentation


def test_segmentation_example():
    rec = _rec([1.0, 2.0, 3.0, 500.0], [0, 0, 0, 0], 500.0)
    seg = segment_periods(rec, 50.0)
    assert [(p.kind, p.start, p.end) for p in seg.periods] == [
        (BRIGHT, 0.0, 3.0), (DARK, 3.0, 500.0)]


def test_segmentation_lone_photon_merges_dark():
    rec = _rec([250.0], [0], 500.0)
    seg = segment_periods(rec, 50.0)
    assert [(p.kind, p.start, p.end) for p in seg.periods] == [(DARK, 0.0, 500.0)]


def test_segmentation_no_gaps_single_bright():
    rec = _rec(np.arange(10.0, 100.0, 10.0), np.zeros(9), 100.0)
    seg = segment_periods(rec, 50.0)
    assert [(p.kind, p.start, p.end) for p in seg.periods] == [(BRIGHT, 0.0, 100.0)]


def test_segmentation_ignores_weak_photons():
    rec = _rec([10.0, 20.0, 80.0], [0, 0, 1], 100.0)
    seg = segment_periods(rec, 50.0)
    # the weak photon at 80 does not interrupt the trailing dark period
    assert [(p.kind, p.start, p.end) for p in seg.periods] == [
        (BRIGHT, 0.0, 20.0), (DARK, 20.0, 100.0)]


def test_segmentation_empty_record_is_all_dark():
    seg = segment_periods(_rec([], [], 300.0), 50.0)
    assert [(p.kind, p.start, p.end) for p in seg.periods] == [(DARK, 0.0, 300.0)]


def test_segmentation_threshold_guard():
    with pytest.raises(AnalysisError, match="gap_threshold must be positive"):
        segment_periods(_rec([], [], 10.0), 0.0)


def test_segmentation_tiles_random_records():
    rng = np.random.default_rng(17)
    for _ in range(40):
        n = int(rng.integers(0, 60))
        times = np.sort(rng.uniform(0.0, 1000.0, n))
        chans = rng.integers(0, 2, n)
        seg = segment_periods(_rec(times, chans, 1000.0), float(rng.uniform(5, 400)))
        # the constructor re-validates alternation and tiling; check coverage
        assert sum(p.duration for p in seg.periods) == pytest.approx(1000.0)
        assert all(p.duration > 0.0 for p in seg.periods)
        if seg.periods:
            assert seg.periods[0].start == 0.0


def test_segmentation_validator_rejects_bad_tilings():
    from shelvesim.analysis import Period
    with pytest.raises(ValueError, match="alternate"):
        PeriodSegmentation((Period(DARK, 0.0, 5.0), Period(DARK, 5.0, 5.0)), 10.0)
    with pytest.raises(ValueError, match="without gaps"):
        PeriodSegmentation((Period(DARK, 0.0, 4.0), Period(BRIGHT, 5.0, 5.0)), 10.0)
    with pytest.raises(ValueError, match="end at t_max"):
        PeriodSegmentation((Period(DARK, 0.0, 4.0),), 10.0)


# ---------------------------------------------------------------------------
# waiting times


def test_waiting_times_reset_at_every_photon():
    rec = _rec([1.0, 4.0, 6.0], [0, 1, 0], 10.0)
    np.testing.assert_allclose(waiting_times(rec, Channel.STRONG), [5.0, 2.0])
    np.testing.assert_allclose(waiting_times(rec, Channel.WEAK), [3.0])


def test_waiting_times_need_two_events():
    assert waiting_times(_rec([3.0], [0], 10.0), Channel.STRONG).size == 0
    assert waiting_times(_rec([], [], 10.0), Channel.STRONG).size == 0


def test_waiting_times_strictly_positive():
    rng = np.random.default_rng(23)
    for _ in range(20):
        n = int(rng.integers(2, 80))
        times = np.sort(rng.uniform(0.0, 100.0, n))
        chans = rng.integers(0, 2, n)
        rec = _rec(times, chans, 100.0)
        for ch in (Channel.STRONG, Channel.WEAK):
            waits = waiting_times(rec, ch)
            assert np.all(waits > 0.0)


def test_pooled_waiting_times():
    a = _rec([1.0, 2.0], [0, 0], 10.0)
    b = _rec([5.0], [0], 10.0)
    pooled = pooled_waiting_times([a, b], Channel.STRONG)
    np.testing.assert_allclose(pooled, [1.0])
    assert pooled_waiting_times([b], Channel.STRONG).size == 0


def test_interarrival_times():
    rec = _rec([1.0, 4.0, 6.0, 7.0], [0, 1, 0, 0], 10.0)
    np.testing.assert_allclose(interarrival_times(rec, Channel.STRONG), [5.0, 1.0])
    assert interarrival_times(rec, Channel.WEAK).size == 0


def test_per_target_waits_thin_nests():
    rec = _rec([1.0, 2.0, 3.0, 100.0], [1, 1, 1, 0], 200.0)
    # three photons wait for the same strong target: keep the earliest
    np.testing.assert_allclose(_per_target_waits(rec, Channel.STRONG), [99.0])
    rec2 = _rec([1.0, 4.0, 6.0], [0, 1, 0], 10.0)
    np.testing.assert_allclose(_per_target_waits(rec2, Channel.STRONG), [5.0])


# ---------------------------------------------------------------------------
# two-exponential fits


def _mixture_samples(rng, n=20000, fast=0.5, slow=0.005, mass_fast=0.95):
    pick = rng.random(n) < mass_fast
    return np.where(pick, rng.exponential(1.0 / fast, n),
                    rng.exponential(1.0 / slow, n))


def test_fit_recovers_known_mixture():
    y = _mixture_samples(np.random.default_rng(0))
    fit = fit_waiting_distribution(y)
    assert fit.fast_rate == pytest.approx(0.5, rel=0.10)
    assert fit.slow_rate == pytest.approx(0.005, rel=0.10)
    assert fit.weight == pytest.approx(0.05, abs=0.02)
    assert 0 < fit.n_samples < y.size  # the refit window is left-truncated
    assert fit.t_min > 0.0
    assert fit.goodness < 0.05


def test_fit_self_consistent_under_redraw():
    """Parametric bootstrap: a redraw from the fit refits to the same rates."""
    fit1 = fit_waiting_distribution(_mixture_samples(np.random.default_rng(0)))
    rng = np.random.default_rng(1)
    n = 20000
    pick = rng.random(n) < (1.0 - fit1.weight)
    y2 = np.where(pick, rng.exponential(1.0 / fit1.fast_rate, n),
                  rng.exponential(1.0 / fit1.slow_rate, n))
    fit2 = fit_waiting_distribution(y2)
    assert fit2.fast_rate == pytest.approx(fit1.fast_rate, rel=0.10)
    assert fit2.slow_rate == pytest.approx(fit1.slow_rate, rel=0.10)


def test_fit_rejects_single_exponential():
    y = np.random.default_rng(2).exponential(1.0, 5000)
    with pytest.raises(DegenerateFitError, match="within a factor of 2"):
        fit_waiting_distribution(y)


def test_fit_needs_enough_samples():
    with pytest.raises(AnalysisError, match="need at least 100"):
        fit_waiting_distribution(np.ones(99))
    thin = np.random.default_rng(4).exponential(1.0, 150)
    with pytest.raises(AnalysisError, match="beyond the fast transient"):
        fit_waiting_distribution(thin)


def test_fit_result_invariant():
    from shelvesim.analysis import FitResult
    with pytest.raises(ValueError, match="fast_rate > slow_rate"):
        FitResult(fast_rate=0.1, slow_rate=0.2, weight=0.5, goodness=0.0,
                  n_samples=10, t_min=0.0)


# ---------------------------------------------------------------------------
# dark periods


def test_dark_statistics_censoring():
    rec = _rec([1.0, 2.0, 500.0, 501.0], [0, 0, 0, 0], 1000.0)
    dark = dark_statistics([rec], 100.0)
    # the 501 -> 1000 stretch never ends inside the window: censored out
    assert dark.count == 1
    assert dark.mean_excess == pytest.approx(398.0)
    assert dark.rate == pytest.approx(1.0 / 398.0)
    assert dark.gap_threshold == 100.0


def test_lone_photon_does_not_split_a_dark_stretch():
    # a single sub-threshold flash mid-dark merges into one long dark period
    rec = _rec([1.0, 2.0, 500.0, 901.0, 902.0], [0, 0, 0, 0, 0], 1000.0)
    dark = dark_statistics([rec], 100.0)
    assert dark.count == 1
    assert dark.mean_excess == pytest.approx(901.0 - 2.0 - 100.0)


def test_dark_statistics_empty():
    dark = dark_statistics([_rec([1.0, 2.0, 3.0], [0, 0, 0], 4.0)], 100.0)
    assert dark.count == 0
    assert np.isnan(dark.mean_excess) and np.isnan(dark.rate)


def test_exponential_ks():
    rng = np.random.default_rng(5)
    y = rng.exponential(2.0, 4000)
    _, p_good = exponential_ks(y, 0.5)
    assert p_good > 0.01
    _, p_bad = exponential_ks(y, 5.0)
    assert p_bad < 1e-6
    with pytest.raises(AnalysisError, match="no samples"):
        exponential_ks([], 1.0)


def test_weak_gaps_measure_dark_durations(big_nrules, desk_oracle):
    """Photon gaps that end in a weak emission span whole dark periods, so
    their tail is a single exponential at the shelving-exit rate."""
    gaps = []
    for rec in big_nrules:
        d = np.diff(rec.times)
        gaps.append(d[rec.channels[1:] == Channel.WEAK.code])
    g = np.concatenate(gaps)
    excess = g[g > 150.0] - 150.0
    assert excess.size >= 300
    rate = 1.0 / excess.mean()
    assert rate == pytest.approx(desk_oracle.lambda2, rel=0.15)


# ---------------------------------------------------------------------------
# cross-ensemble comparison


def test_compare_self_is_exact(big_nrules):
    report = compare_records(big_nrules[:4], big_nrules[:4], 150.0)
    assert report.strong.statistic == 0.0
    assert report.weak.statistic == 0.0
    assert report.min_pvalue() == pytest.approx(1.0)
    assert report.bright_mean_ratio == pytest.approx(1.0)
    assert report.dark_mean_ratio == pytest.approx(1.0)
    assert report.strong.n_a == report.strong.n_b <= 10_000


def test_compare_requires_data():
    with pytest.raises(AnalysisError, match="empty ensemble"):
        compare_records([], [], 100.0)
    strong_only = _rec([1.0, 2.0, 3.0], [0, 0, 0], 10.0)
    with pytest.raises(AnalysisError, match="no weak-channel waiting times"):
        compare_records([strong_only], [strong_only], 5.0)


# ---------------------------------------------------------------------------
# weak-photon ordering


def test_weak_ordering_sides():
    after = _rec([10.0, 295.0, 300.0], [0, 1, 0], 310.0)
    stats = weak_ordering([after], 100.0)
    assert (stats.n_dark, stats.n_before, stats.n_after) == (1, 0, 1)
    assert stats.fraction("after") == 1.0

    before = _rec([10.0, 12.0, 300.0], [0, 1, 0], 310.0)
    stats = weak_ordering([before], 100.0)
    assert (stats.n_before, stats.n_after) == (1, 0)
    assert stats.fraction("before") == 1.0


def test_weak_ordering_window_and_unclassified():
    rec = _rec([10.0, 155.0, 300.0], [0, 1, 0], 310.0)
    # the weak photon sits mid-dark: nearest edge is 145 away
    assert weak_ordering([rec], 100.0).n_unclassified == 1
    assert weak_ordering([rec], 100.0, window=150.0).n_before == 1
    empty = _rec([10.0, 300.0], [0, 0], 310.0)
    assert weak_ordering([empty], 100.0).n_unclassified == 1


def test_weak_ordering_skips_boundary_darks():
    rec = _rec([200.0], [0], 400.0)
    stats = weak_ordering([rec], 100.0)
    assert stats.n_dark == 0
    assert np.isnan(stats.fraction("after"))


def test_weak_ordering_side_names():
    classified = weak_ordering([_rec([10.0, 295.0, 300.0], [0, 1, 0], 310.0)], 100.0)
    with pytest.raises(ValueError, match="side must be"):
        classified.fraction("sideways")


# ---------------------------------------------------------------------------
# exports


def test_waiting_histogram_counts():
    y = np.random.default_rng(6).exponential(1.0, 500)
    edges, counts = waiting_histogram(y, n_bins=40)
    assert edges.size == 41
    assert counts.sum() == 500
    assert np.all(np.diff(edges) > 0.0)
    with pytest.raises(AnalysisError, match="no positive samples"):
        waiting_histogram(np.zeros(5))


def test_write_histogram_csv(tmp_path):
    edges, counts = waiting_histogram([0.5, 1.0, 2.0, 4.0], n_bins=3)
    path = tmp_path / "hist.csv"
    write_histogram_csv(path, edges, counts)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["bin_left", "bin_right", "count"]
    assert len(rows) == 4
    got = np.array([float(r[0]) for r in rows[1:]])
    np.testing.assert_array_equal(got, edges[:-1])
    assert sum(int(r[2]) for r in rows[1:]) == 4


def test_segmentation_summary_keys():
    rec = _rec([1.0, 2.0, 3.0, 500.0], [0, 0, 0, 0], 500.0)
    summary = segmentation_summary([rec], 50.0)
    assert set(summary) == {"gap_threshold", "n_bright", "n_dark",
                            "mean_bright", "mean_dark", "dark_fraction"}
    assert summary["n_bright"] == 1 and summary["n_dark"] == 1
    assert summary["mean_bright"] == pytest.approx(3.0)
    assert summary["mean_dark"] == pytest.approx(497.0)
    assert summary["dark_fraction"] == pytest.approx(497.0 / 500.0)
    silent = segmentation_summary([_rec([], [], 100.0)], 50.0)
    assert silent["n_bright"] == 0 and silent["mean_bright"] is None
    assert silent["dark_fraction"] == pytest.approx(1.0)
