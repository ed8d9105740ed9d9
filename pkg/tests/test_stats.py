import numpy as np
import pytest

from openbattery.exact import effective_local_objective, evolve_krylov
from openbattery.stats import WorkStatistics, fluctuation_series, work_moments, work_moments_exact

from conftest import random_unitary


def test_reduced_matches_full_vector(small_setup, rng):
    H, charged = small_setup["H"], small_setup["charged"]
    states = [s for _, s in evolve_krylov(charged, H, horizon=1.0, sample_every=25)]
    for s in states:
        obj = effective_local_objective(s, H)
        for _ in range(3):
            u = random_unitary(rng)
            a, b = work_moments(obj, u), work_moments_exact(s, H, u)
            assert a.mean == pytest.approx(b.mean, abs=1e-10)
            assert a.second_moment == pytest.approx(b.second_moment, abs=1e-10)


def test_variance_nonnegative(small_setup, rng):
    obj = effective_local_objective(small_setup["charged"], small_setup["H"])
    for _ in range(50):
        assert work_moments(obj, random_unitary(rng)).variance > -1e-12


def test_identity_gate_does_no_work(small_setup):
    obj = effective_local_objective(small_setup["charged"], small_setup["H"])
    w = work_moments(obj, np.eye(4))
    assert w.mean == pytest.approx(0.0, abs=1e-14)
    assert w.second_moment == pytest.approx(0.0, abs=1e-14)
    assert not w.rel_fluct_defined and np.isnan(w.rel_fluct)


def test_from_moments():
    w = WorkStatistics.from_moments(2.0, 5.0)
    assert w.variance == 1.0 and w.std == 1.0 and w.rel_fluct == 0.5 and w.rel_fluct_defined
    assert not WorkStatistics.from_moments(-1.0, 2.0).rel_fluct_defined


def test_fluctuation_series_policies(small_setup):
    H, u = small_setup["H"], small_setup["u"]
    traj = [(t, effective_local_objective(s, H)) for t, s in
            evolve_krylov(small_setup["charged"], H, horizon=0.4, sample_every=10)]
    fixed = fluctuation_series(traj, u.conj().T)
    called = fluctuation_series(traj, lambda t, obj: u.conj().T)
    assert [t for t, _ in fixed] == pytest.approx([0.0, 0.2, 0.4])
    assert [w.mean for _, w in fixed] == [w.mean for _, w in called]
