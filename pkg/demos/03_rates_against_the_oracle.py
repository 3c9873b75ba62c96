"""
Checking simulated rates against an independent prediction
==========================================================

The telegraph oracle predicts three numbers for a scheme without running a
single trajectory: the bright-period detection rate beta1, the dark-period
escape rate lambda2, and the weight of the slow component in the strong
channel's waiting-time distribution. This demo runs an ensemble, fits the
waiting times and dark durations, and puts simulation and prediction side
by side.
"""

from shelvesim import (
    Channel,
    dark_statistics,
    desk_scheme,
    exponential_ks,
    fit_waiting_distribution,
    pooled_waiting_times,
    run_ensemble,
    telegraph_oracle,
)

scheme = desk_scheme(rabi_onset="immediate")

# Rate-equation prediction from the scheme parameters alone.
oracle = telegraph_oracle(scheme)
print("oracle beta1  :", oracle.beta1)
print("oracle lambda2:", oracle.lambda2)
print("oracle weight :", oracle.weight)

# A modest ensemble: 8 trajectories of 4e5 time units. The acceptance
# tests use 4x more data; expect percent-level agreement here, not better.
records = run_ensemble(scheme, 8, 4.0e5, base_seed=3)
n_events = sum(r.n_events for r in records)
print("\nensemble:", len(records), "trajectories,", n_events, "photons")

# Strong-channel waiting times (reset at every photon) are a mixture of a
# fast bright component and a rare slow tail from waits that straddle a
# dark period. The fast rate measures beta1/2 — between two strong photons
# the emitter re-excites from the ground state, which doubles the mean
# wait relative to the bare detection rate. The slow rate measures lambda2.
waits = pooled_waiting_times(records, Channel.STRONG)
fit = fit_waiting_distribution(waits)
print("\nstrong-channel waiting fit on", fit.n_samples, "tail samples:")
print(f"  fast rate {fit.fast_rate:.5f}  vs beta1/2  {0.5 * oracle.beta1:.5f}"
      f"  (ratio {fit.fast_rate / (0.5 * oracle.beta1):.3f})")
print(f"  slow rate {fit.slow_rate:.6f} vs lambda2  {oracle.lambda2:.6f}"
      f"  (ratio {fit.slow_rate / oracle.lambda2:.3f})")

# Dark periods end at rate lambda2. The excess-over-threshold estimator
# is unbiased for an exponential tail, and a KS test checks the whole
# shape, not just the mean.
dark = dark_statistics(records, 150.0)
print("\ndark periods:", dark.count)
print(f"  mean excess {dark.mean_excess:.1f}  vs 1/lambda2 {1.0 / oracle.lambda2:.1f}")
stat, pvalue = exponential_ks(dark.excesses, oracle.lambda2)
print(f"  KS vs exponential(lambda2): statistic {stat:.3f}, p = {pvalue:.3f}")
