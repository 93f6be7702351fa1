import numpy as np
import pytest
from scipy.special import ndtr

from growthlab.driving import (
    DrivingFunction,
    centered_cdf_transform,
    identity_transform,
    make_ballistic,
    make_polymer,
    make_random_deposition,
    make_rsos,
)
from growthlab.engine import (
    AlternatingRsos,
    FieldWindow,
    SimulationPlan,
    Trajectory,
    evolve_step,
    flat_window,
    run_ensemble,
    simulate,
    simulate_rsos_alternating,
    simulate_rsos_simultaneous,
)
from growthlab.lattice import SiteCoord
from growthlab.noise import NoiseField

RD = make_random_deposition(identity_transform(), 1)


def _zeroing_noise(seed: int, t_range, lo: int, hi: int, d: int = 1) -> NoiseField:
    """Field whose variates are exactly 0 on a box (via cancelling overlays)."""
    nf = NoiseField(seed=seed)
    for t in t_range:
        for x in range(lo, hi + 1):
            s = SiteCoord(t=t, x=(x,))
            nf = nf.with_overlay(s, -NoiseField(seed=seed).gaussian_at(s))
    return nf


# -- evolve_step --------------------------------------------------------------


def test_evolve_step_zero_noise_keeps_heights():
    noise = _zeroing_noise(4, [1], -4, 4)
    w = flat_window(1, radius=4)
    w1 = evolve_step(w, RD, noise)
    assert w1.t == 1
    assert w1.valid_radius == 3
    assert np.array_equal(w1.heights, np.zeros(7))


def test_evolve_step_ballistic_flat():
    phi = make_ballistic(1)
    noise = NoiseField(seed=6)
    w = flat_window(1, radius=3)
    w1 = evolve_step(w, phi, noise)
    for x in range(-2, 3):
        z = noise.gaussian_at(SiteCoord(t=1, x=(x,)))
        assert w1.height_at((x,)) == float(ndtr(z))  # max(c + U, c) = c + U


def test_evolve_step_deterministic_and_refuses_exhausted_window():
    noise = NoiseField(seed=9)
    w = flat_window(1, radius=2)
    a = evolve_step(w, RD, noise)
    b = evolve_step(w, RD, noise)
    assert np.array_equal(a.heights, b.heights)
    exhausted = evolve_step(evolve_step(w, RD, noise), RD, noise)
    assert exhausted.valid_radius == 0
    with pytest.raises(ValueError):
        evolve_step(exhausted, RD, noise)


def test_window_height_guard():
    w = flat_window(2, radius=3)
    assert w.height_at((3, -3)) == 0.0
    with pytest.raises(ValueError):
        w.height_at((4, 0))
    with pytest.raises(ValueError):
        FieldWindow(t=0, center=(0,), radius=1, valid_radius=2, heights=np.zeros(3))


# -- simulate -----------------------------------------------------------------


def test_simulate_t0_flat():
    plan = SimulationPlan(model=RD, t_max=0, seed=1, probes=((0,), (5,)))
    res = simulate(plan)
    assert np.array_equal(res.probe_values, [0.0, 0.0])


def test_simulate_rejects_negative_horizon():
    with pytest.raises(ValueError):
        SimulationPlan(model=RD, t_max=-1, seed=1)


def test_random_deposition_telescopes_to_noise_sums():
    plan = SimulationPlan(model=RD, t_max=50, seed=77, probes=((0,), (3,)))
    res = simulate(plan)
    nf = plan.noise_field()
    for k, probe in enumerate(((0,), (3,))):
        total = sum(nf.gaussian_at(SiteCoord(t=s, x=probe)) for s in range(1, 51))
        assert res.probe_values[k] == pytest.approx(total, abs=1e-12)
        partial = sum(nf.gaussian_at(SiteCoord(t=s, x=probe)) for s in range(1, 21))
        assert res.probe_series[20, k] == pytest.approx(partial, abs=1e-12)


@pytest.mark.parametrize("model", [
    RD, make_ballistic(1), make_rsos(1),
    make_polymer(1.0, centered_cdf_transform(), 1),
])
def test_cone_exactness(model):
    # enlarging the window changes no probe value, bit for bit
    base = SimulationPlan(model=model, t_max=24, seed=5, probes=((0,), (2,)))
    padded = SimulationPlan(model=model, t_max=24, seed=5, probes=((0,), (2,)),
                            extra_radius=3)
    assert np.array_equal(simulate(base).probe_values, simulate(padded).probe_values)


def test_cone_exactness_d2():
    model = make_ballistic(2)
    base = SimulationPlan(model=model, t_max=8, seed=5, probes=((0, 0),))
    padded = SimulationPlan(model=model, t_max=8, seed=5, probes=((0, 0),),
                            extra_radius=2)
    assert simulate(base).probe_values[0] == simulate(padded).probe_values[0]


def test_valid_radius_bookkeeping():
    plan = SimulationPlan(model=RD, t_max=6, seed=2, probes=((0,),),
                          retain_trajectory=True)
    res = simulate(plan)
    for s, w in enumerate(res.trajectory.windows):
        assert w.t == s
        assert w.valid_radius == plan.radius - s
    assert res.final_window.valid_radius == 0


def test_trajectory_retention_matches_evolve_step():
    plan = SimulationPlan(model=make_ballistic(1), t_max=3, seed=42,
                          probes=((0,),), retain_trajectory=True)
    traj = simulate(plan).trajectory
    noise = plan.noise_field()
    w = flat_window(1, radius=plan.radius)
    for s in range(1, 4):
        w = evolve_step(w, plan.model, noise)
        inner = traj.window(s)
        for x in range(-w.valid_radius, w.valid_radius + 1):
            assert inner.height_at((x,)) == w.height_at((x,))


def test_step_matches_per_site_evaluate():
    # the vectorized kernels against the scalar evaluation contract
    for model in (make_ballistic(1), make_rsos(1),
                  make_polymer(1.0, centered_cdf_transform(), 1),
                  make_ballistic(2)):
        d = model.d
        plan = SimulationPlan(model=model, t_max=3, seed=71,
                              probes=((0,) * d,), retain_trajectory=True)
        traj = simulate(plan).trajectory
        noise = plan.noise_field()
        w_prev, w_next = traj.window(2), traj.window(3)
        r = w_next.valid_radius
        for idx in np.ndindex(*(2 * r + 1,) * d):
            x = tuple(idx[i] - r for i in range(d))
            u = w_prev.stencil_heights(x, model.hood)
            z = noise.gaussian_at(SiteCoord(t=3, x=x))
            assert w_next.height_at(x) == pytest.approx(model.evaluate(u, z),
                                                        abs=1e-12)


def test_translation_invariance_in_law():
    n = 4000
    here = SimulationPlan(model=make_ballistic(1), t_max=16, seed=3, probes=((0,),))
    there = SimulationPlan(model=make_ballistic(1), t_max=16, seed=3, probes=((0,),),
                           center=(1000,))
    a = run_ensemble(here, n).probe_stats[(0,)]
    b = run_ensemble(there, n).probe_stats[(0,)]
    se = np.sqrt(a.variance() / n + b.variance() / n)
    assert abs(a.mean - b.mean) <= 5 * se


# -- constrained-growth rules -------------------------------------------------


def test_alternating_first_step_parity():
    alt = AlternatingRsos(1)
    plan = SimulationPlan(model=alt, t_max=1, seed=8, probes=((0,),),
                          retain_trajectory=True)
    w1 = simulate_rsos_alternating(plan).trajectory.window(1)
    noise = plan.noise_field()
    for x in range(-w1.valid_radius, w1.valid_radius + 1):
        h = w1.height_at((x,))
        if x % 2 == 0:
            u = 1.0 - 2.0 * ndtr(noise.gaussian_at(SiteCoord(t=1, x=(x,))))
            assert h == pytest.approx(u, abs=1e-15)
            assert -1.0 <= h <= 1.0
        else:
            assert h == 0.0  # odd sites keep their height on the first step


def test_alternating_neighbor_gap_invariant():
    alt = AlternatingRsos(1)
    plan = SimulationPlan(model=alt, t_max=64, seed=12, probes=((0,),),
                          retain_trajectory=True)
    traj = simulate_rsos_alternating(plan).trajectory
    for w in traj.windows:
        r = w.valid_radius
        vals = np.array([w.height_at((x,)) for x in range(-r, r + 1)])
        if len(vals) > 1:
            assert np.abs(np.diff(vals)).max() <= 1.0


def test_alternating_d2_runs_with_constraints():
    alt = AlternatingRsos(2)
    plan = SimulationPlan(model=alt, t_max=12, seed=4, probes=((0, 0),))
    simulate_rsos_alternating(plan)  # per-step asserts inside


def test_simultaneous_first_step_range_and_two_step_gap():
    phi = make_rsos(1)
    plan = SimulationPlan(model=phi, t_max=40, seed=19, probes=((0,),),
                          retain_trajectory=True)
    traj = simulate_rsos_simultaneous(plan).trajectory
    w1 = traj.window(1)
    vals1 = [w1.height_at((x,)) for x in range(-3, 4)]
    assert all(-1.0 <= v <= 1.0 for v in vals1)
    for w in traj.windows:
        r = w.valid_radius
        vals = np.array([w.height_at((x,)) for x in range(-r, r + 1)])
        if len(vals) > 2:
            assert np.abs(vals[2:] - vals[:-2]).max() <= 2.0


def test_simultaneous_wrapper_type_check():
    with pytest.raises(ValueError):
        simulate_rsos_simultaneous(SimulationPlan(model=RD, t_max=1, seed=1))
    with pytest.raises(ValueError):
        simulate_rsos_alternating(SimulationPlan(model=RD, t_max=1, seed=1))


def test_rsos_two_step_gap_ensemble_bound():
    phi = make_rsos(1)
    plan = SimulationPlan(model=phi, t_max=16, seed=6, probes=((0,), (2,)),
                          pairs=((0, 1),))
    res = run_ensemble(plan, 2000)
    sq = np.square(res.pair_stats[((0,), (2,))].values)
    assert sq.max() <= 4.0  # realization bound, not just in expectation


# -- ensembles ----------------------------------------------------------------


def test_ensemble_deterministic_across_parallelism():
    plan = SimulationPlan(model=RD, t_max=12, seed=10, probes=((0,), (1,)),
                          pairs=((0, 1),))
    a = run_ensemble(plan, 2500, parallelism=1)
    b = run_ensemble(plan, 2500, parallelism=8)
    for key in a.probe_stats:
        assert a.probe_stats[key].n == b.probe_stats[key].n
        assert a.probe_stats[key].mean == b.probe_stats[key].mean
        assert a.probe_stats[key].m2 == b.probe_stats[key].m2
        assert a.probe_stats[key].m4 == b.probe_stats[key].m4
        assert np.array_equal(a.probe_stats[key].values, b.probe_stats[key].values)


def test_ensemble_replica_indexing_matches_single_runs():
    plan = SimulationPlan(model=make_ballistic(1), t_max=10, seed=44, probes=((0,),))
    res = run_ensemble(plan, 8)
    values = res.probe_stats[(0,)].values
    for r in (0, 3, 7):
        single = SimulationPlan(model=plan.model, t_max=10, seed=44, replica=r,
                                probes=((0,),))
        assert values[r] == simulate(single).probe_values[0]


def test_ensemble_variance_recovers_random_deposition():
    t, n = 100, 10_000
    plan = SimulationPlan(model=RD, t_max=t, seed=606, probes=((0,),))
    stats = run_ensemble(plan, n, parallelism=4).probe_stats[(0,)]
    var = stats.variance()
    se = np.sqrt(2.0 / (n - 1)) * t  # exact-law Gaussian SE of s^2
    assert abs(var - t) <= 5 * se


def test_ensemble_needs_two_replicas():
    plan = SimulationPlan(model=RD, t_max=2, seed=1)
    with pytest.raises(ValueError):
        run_ensemble(plan, 1)


def test_ensemble_rejects_trajectory_retention():
    plan = SimulationPlan(model=RD, t_max=2, seed=1, retain_trajectory=True)
    with pytest.raises(ValueError):
        run_ensemble(plan, 4)


# -- custom in-source rules ------------------------------------------------------


class _StencilAverage(DrivingFunction):
    """Equal-weight average of the stencil plus the raw noise; exercises the
    generic (non-kernel) step path."""

    kind = "stencil_average"

    def __init__(self, d):
        super().__init__(d, 1.0)

    def evaluate_many(self, U, Z):
        U = self._check_U(U)
        return U.mean(axis=1) + np.asarray(Z, dtype=np.float64)

    def spatial_gradient(self, u, z):
        self._check_u(u)
        return np.full(self.hood.size, 1.0 / self.hood.size)

    def noise_derivative(self, u, z):
        return 1.0


def test_custom_rule_runs_through_generic_path():
    phi = _StencilAverage(1)
    plan = SimulationPlan(model=phi, t_max=8, seed=33, probes=((0,),))
    res = simulate(plan)
    padded = SimulationPlan(model=phi, t_max=8, seed=33, probes=((0,),),
                            extra_radius=2)
    assert simulate(padded).probe_values[0] == res.probe_values[0]
    # one manual step cross-check against evaluate()
    noise = plan.noise_field()
    w0 = flat_window(1, radius=2)
    w1 = evolve_step(w0, phi, noise)
    z = noise.gaussian_at(SiteCoord(t=1, x=(0,)))
    assert w1.height_at((0,)) == phi.evaluate([0.0, 0.0, 0.0], z)


def test_custom_rule_walk_distribution_spreads_uniformly():
    phi = _StencilAverage(1)
    plan = SimulationPlan(model=phi, t_max=3, seed=34, probes=((0,),),
                          retain_trajectory=True)
    traj = simulate(plan).trajectory
    from growthlab.walk import walk_distribution
    dist = walk_distribution(traj, phi, (3, (0,)))
    assert dist.slices[2] == pytest.approx(
        {(0,): 1 / 3, (1,): 1 / 3, (-1,): 1 / 3})
