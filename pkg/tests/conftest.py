"""Shared fixtures.

The two large ensembles are expensive (about half a minute each) and are
shared by the waiting-time, dark-statistics, and cross-engine tests, so they
are built once per session. Everything downstream of them is deterministic:
the seeds below are part of the frozen expectations.
"""

import pytest

from shelvesim import desk_scheme, run_ensemble, telegraph_oracle


@pytest.fixture(scope="session")
def desk_v_immediate():
    return desk_scheme(rabi_onset="immediate")


@pytest.fixture(scope="session")
def desk_oracle(desk_v_immediate):
    return telegraph_oracle(desk_v_immediate)


@pytest.fixture(scope="session")
def big_nrules(desk_v_immediate):
    # 16 x 2e6 time units at a finer trigger step than the default; ~2.4M events
    return run_ensemble(desk_v_immediate, 16, 2.0e6, base_seed=20260815,
                        target_p=0.005)


@pytest.fixture(scope="session")
def big_mcwf(desk_v_immediate):
    return run_ensemble(desk_v_immediate, 16, 2.0e6, base_seed=911,
                        engine="mcwf")
