"""Hard verification suites behind the `verify` CLI command.

Three suites, all deterministic given their seed:

  driving - randomized certification of the update-rule axioms, gradient
            simplex structure, derivative bounds, and the sticky-rule envelope
  walk    - the derivative factorization against finite differences, slice
            conservation, and the squared-influence bound
  oracles - path-sum identities against brute force and the four scalar
            inequalities

Every check yields a named result with a margin (how far from the
threshold, positive = comfortable); a suite passes only if every check does.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from . import driving, oracles
from .driving import DrivingFunction, check_axioms
from .engine import SimulationPlan, simulate
from .lattice import SiteCoord
from .walk import cone_sites, derivative_via_fd, derivative_via_walk, walk_distribution


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    margin: float
    detail: str = ""


def standard_models(d: int = 1) -> dict[str, DrivingFunction]:
    """The five built-in rules with their acceptance-profile transforms."""
    unit = driving.centered_cdf_transform()
    return {
        "random_deposition": driving.make_random_deposition(driving.identity_transform(), d),
        "rsos": driving.make_rsos(d),
        "ballistic": driving.make_ballistic(d),
        "lpp": driving.make_lpp(unit, d),
        "polymer": driving.make_polymer(1.0, unit, d),
    }


# -- driving suite -------------------------------------------------------------


def _gradient_checks(phi: DrivingFunction, rng: np.random.Generator,
                     n: int) -> tuple[float, float, float]:
    """Returns (worst simplex defect, worst negative entry, worst |dz| over L)."""
    worst_sum = 0.0
    worst_neg = 0.0
    worst_dz = 0.0
    m = phi.hood.size
    for _ in range(n):
        u = rng.normal(0.0, 10.0, size=m)
        z = rng.normal()
        g = phi.spatial_gradient(u, z)
        worst_sum = max(worst_sum, abs(float(g.sum()) - 1.0))
        worst_neg = max(worst_neg, max(0.0, float(-g.min())))
        worst_dz = max(worst_dz, abs(phi.noise_derivative(u, z)) - phi.lipschitz_L)
    return worst_sum, worst_neg, worst_dz


def _fd_derivative_checks(phi: DrivingFunction, rng: np.random.Generator,
                          n: int, step: float = 1e-5) -> float:
    """Worst relative error of analytic gradients against centered
    differences of the evaluation; smooth rules only.

    Gradient entries live on the probability simplex and the noise
    derivative is bounded by L, so the denominator is floored at 1e-5:
    below that, a fixed-step difference carries only rounding noise
    (~1e-10) and a self-relative comparison would be vacuous.
    """
    worst = 0.0
    m = phi.hood.size
    for _ in range(n):
        u = rng.normal(0.0, 3.0, size=m)
        z = rng.normal()
        g = phi.spatial_gradient(u, z)
        for j in range(m):
            up = u.copy(); up[j] += step
            dn = u.copy(); dn[j] -= step
            fd = (phi.evaluate(up, z) - phi.evaluate(dn, z)) / (2 * step)
            worst = max(worst, abs(fd - g[j]) / max(abs(fd), 1e-5))
        fdz = (phi.evaluate(u, z + step) - phi.evaluate(u, z - step)) / (2 * step)
        dz = phi.noise_derivative(u, z)
        worst = max(worst, abs(fdz - dz) / max(abs(fdz), 1e-5))
    return worst


def verify_driving(seed: int = 1, n_samples: int = 100_000,
                   include_broken: bool = False) -> list[CheckResult]:
    results: list[CheckResult] = []
    models = standard_models(d=1)
    models["polymer_d2"] = driving.make_polymer(2.0, driving.gaussian_cdf_transform(), 2)
    models["ballistic_d2"] = driving.make_ballistic(2)
    rng = np.random.default_rng(seed)
    for name, phi in models.items():
        rep = check_axioms(phi, n_samples, rng_seed=seed + zlib.crc32(name.encode()) % 1000)
        results.append(CheckResult(
            f"{name}.equivariance", rep.max_equivariance_violation <= 1e-10,
            1e-10 - rep.max_equivariance_violation,
            f"worst {rep.max_equivariance_violation:.3e}"))
        results.append(CheckResult(
            f"{name}.equivariance_stress", rep.max_equivariance_violation_stress <= 1e-8,
            1e-8 - rep.max_equivariance_violation_stress,
            f"worst {rep.max_equivariance_violation_stress:.3e} at coordinates 1e6"))
        results.append(CheckResult(
            f"{name}.monotonicity", rep.max_monotonicity_violation == 0.0,
            -rep.max_monotonicity_violation,
            f"worst {rep.max_monotonicity_violation:.3e}"))
        results.append(CheckResult(
            f"{name}.lipschitz_z", rep.lipschitz_z_estimate <= phi.lipschitz_L + 1e-8,
            phi.lipschitz_L + 1e-8 - rep.lipschitz_z_estimate,
            f"estimate {rep.lipschitz_z_estimate:.6f} vs declared {phi.lipschitz_L:.6f}"))
        results.append(CheckResult(
            f"{name}.lipschitz_joint",
            rep.linf_lipschitz_estimate <= phi.lipschitz_L + 1.0 + 1e-8,
            phi.lipschitz_L + 1.0 + 1e-8 - rep.linf_lipschitz_estimate,
            f"estimate {rep.linf_lipschitz_estimate:.6f} vs L+1"))
        gsum, gneg, dzover = _gradient_checks(phi, rng, n=2000)
        results.append(CheckResult(
            f"{name}.gradient_simplex", gsum <= 1e-12 and gneg <= 1e-12,
            1e-12 - max(gsum, gneg), f"sum defect {gsum:.2e}, negativity {gneg:.2e}"))
        results.append(CheckResult(
            f"{name}.noise_derivative_bound", dzover <= 1e-10, -dzover,
            f"|dz| exceeds L by {max(dzover, 0.0):.2e}"))
        if phi.smoothness_class == "smooth":
            fd_err = _fd_derivative_checks(phi, rng, n=200)
            results.append(CheckResult(
                f"{name}.derivatives_match_fd", fd_err <= 1e-4, 1e-4 - fd_err,
                f"worst relative error {fd_err:.3e}"))

    # envelope of the sticky rule: within K1 + K2 |z| of the plain stencil max
    bal = models["ballistic"]
    U = rng.normal(0.0, 10.0, size=(n_samples, bal.hood.size))
    Z = rng.normal(size=n_samples)
    dev = np.abs(bal.evaluate_many(U, Z) - U.max(axis=1))
    envelope = bal.max_envelope_k1 + bal.max_envelope_k2 * np.abs(Z)
    worst = float((dev - envelope).max())
    results.append(CheckResult(
        "ballistic.max_envelope", worst <= 1e-12, 1e-12 - worst,
        f"worst excursion {worst:.2e}"))

    if include_broken:
        rep = check_axioms(driving.make_broken_fixture(1), min(n_samples, 10_000),
                           rng_seed=seed)
        results.append(CheckResult(
            "broken_fixture.monotonicity", rep.max_monotonicity_violation == 0.0,
            -rep.max_monotonicity_violation,
            f"violation {rep.max_monotonicity_violation:.3e} (expected to fail)"))
    return results


# -- walk suite ----------------------------------------------------------------


def _walk_case(phi: DrivingFunction, seed: int, t: int, eps: float,
               want_fd: bool) -> tuple[float, float, float]:
    """One realization: (worst slice-sum defect, worst fd relative error over
    the cone, influence-norm excess over L^2 t)."""
    d = phi.d
    origin = tuple(0 for _ in range(d))
    plan = SimulationPlan(model=phi, t_max=t, seed=seed, probes=(origin,),
                          retain_trajectory=True)
    traj = simulate(plan).trajectory
    start = (t, origin)
    dist = walk_distribution(traj, phi, start)
    slice_defect = max(abs(dist.slice_total(s) - 1.0) for s in range(t + 1))
    worst_rel = math.nan
    if want_fd:
        worst_rel = 0.0
        for site in cone_sites(start, d):
            wv = derivative_via_walk(traj, phi, start, site, dist=dist)
            fv = derivative_via_fd(plan, phi, start, site, eps=eps)
            worst_rel = max(worst_rel, abs(wv - fv) / max(abs(fv), 1e-12))
    norm = 0.0
    for s in range(1, t + 1):
        for y, p in dist.slices[s].items():
            u = traj.window(s - 1).stencil_heights(y, phi.hood)
            z = traj.noise.gaussian_at(SiteCoord(t=s, x=y))
            norm += (p * phi.noise_derivative(u, z)) ** 2
    excess = norm - phi.lipschitz_L ** 2 * t
    return slice_defect, worst_rel, excess


def walk_derivative_records(seed: int = 7, n_seeds: int = 20, t: int = 5,
                            eps: float = 1e-5):
    """Per-site derivative comparisons for the smoothed-sum rule, suitable
    for CSV export: one record per (seed, cone site)."""
    from .walk import DerivativeRecord

    phi = driving.make_polymer(1.0, driving.identity_transform(), 1)
    records = []
    for k in range(n_seeds):
        plan = SimulationPlan(model=phi, t_max=t, seed=seed + k, probes=((0,),),
                              retain_trajectory=True)
        traj = simulate(plan).trajectory
        start = (t, (0,))
        dist = walk_distribution(traj, phi, start)
        for site in cone_sites(start, 1):
            wv = derivative_via_walk(traj, phi, start, site, dist=dist)
            fv = derivative_via_fd(plan, phi, start, site, eps=eps)
            records.append((seed + k, DerivativeRecord(site=site, walk_value=wv,
                                                       fd_value=fv)))
    return records


def verify_walk(seed: int = 7, n_seeds: int = 20, t: int = 5,
                eps: float = 1e-5) -> list[CheckResult]:
    results: list[CheckResult] = []
    poly = driving.make_polymer(1.0, driving.identity_transform(), 1)
    worst_slice = 0.0
    worst_rel = 0.0
    for k in range(n_seeds):
        sd, rel, _ = _walk_case(poly, seed + k, t, eps, want_fd=True)
        worst_slice = max(worst_slice, sd)
        worst_rel = max(worst_rel, rel)
    results.append(CheckResult(
        "walk.slice_conservation", worst_slice <= 1e-10, 1e-10 - worst_slice,
        f"worst slice-sum defect {worst_slice:.2e} over {n_seeds} seeds"))
    results.append(CheckResult(
        "walk.fd_agreement_smooth", worst_rel <= 1e-4, 1e-4 - worst_rel,
        f"worst relative error {worst_rel:.3e} (smoothed-sum rule, t={t})"))

    worst_excess = -math.inf
    for name, phi in standard_models(d=1).items():
        for k in range(n_seeds):
            _, _, excess = _walk_case(phi, seed + 1000 + k, t, eps, want_fd=False)
            worst_excess = max(worst_excess, excess)
    results.append(CheckResult(
        "walk.influence_norm_bound", worst_excess <= 1e-8, 1e-8 - worst_excess,
        f"worst excess over L^2 t: {worst_excess:.2e}"))

    # the factorization is only guaranteed for differentiable rules; for the
    # max/interval rules agreement with the tie-broken a.e. derivative is
    # measured and reported, never asserted (informational check)
    import warnings

    models = standard_models(d=1)
    n_sites = 0
    n_close = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name in ("ballistic", "lpp", "rsos"):
            phi = models[name]
            for k in range(min(n_seeds, 5)):
                plan = SimulationPlan(model=phi, t_max=t, seed=seed + 2000 + k,
                                      probes=((0,),), retain_trajectory=True)
                traj = simulate(plan).trajectory
                dist = walk_distribution(traj, phi, (t, (0,)))
                for site in cone_sites((t, (0,)), 1):
                    wv = derivative_via_walk(traj, phi, (t, (0,)), site, dist=dist)
                    fv = derivative_via_fd(plan, phi, (t, (0,)), site, eps=eps)
                    n_sites += 1
                    if abs(wv - fv) / max(abs(fv), 1e-12) <= 1e-4:
                        n_close += 1
    results.append(CheckResult(
        "walk.fd_agreement_maxrules_reported", True, n_close / max(n_sites, 1),
        f"informational: {n_close}/{n_sites} cone sites within 1e-4 for the "
        f"max/interval rules (never asserted; factorization is proved for "
        f"smooth rules only)"))
    return results


# -- oracle suite --------------------------------------------------------------


def verify_oracles(seed: int = 11, n_seeds: int = 50,
                   n_random: int = 100_000) -> list[CheckResult]:
    results: list[CheckResult] = []
    unit = driving.centered_cdf_transform()

    worst = 0.0
    for k in range(n_seeds):
        for t in range(1, 7):
            phi = driving.make_lpp(unit, 2)
            plan = SimulationPlan(model=phi, t_max=t, seed=seed + k, probes=((0, 0),))
            engine_val = simulate(plan).probe_values[0]
            env = oracles.lpp_environment(plan.noise_field(), unit, t, (0, 0))
            worst = max(worst, abs(engine_val - oracles.lpp_bruteforce(env, t)))
    results.append(CheckResult(
        "oracles.lpp_identity_d2", worst <= 1e-9, 1e-9 - worst,
        f"worst |recursion - brute force| = {worst:.2e} over {n_seeds} seeds, t<=6"))

    worst = 0.0
    cases = [(1, range(1, 9)), (2, range(1, 6))]
    for d, t_range in cases:
        phi = driving.make_polymer(1.0, unit, d)
        origin = tuple(0 for _ in range(d))
        for k in range(n_seeds):
            for t in t_range:
                plan = SimulationPlan(model=phi, t_max=t, seed=seed + 100 + k,
                                      probes=(origin,))
                engine_val = simulate(plan).probe_values[0]
                env = oracles.polymer_environment(plan.noise_field(), unit, t, origin)
                worst = max(worst, abs(engine_val - oracles.polymer_bruteforce(env, t, 1.0)))
    results.append(CheckResult(
        "oracles.polymer_identity", worst <= 1e-9, 1e-9 - worst,
        f"worst |recursion - brute force| = {worst:.2e} over {n_seeds} seeds"))

    rng = np.random.default_rng(seed)
    fails = 0
    worst_margin = math.inf
    for _ in range(n_random):
        k = int(rng.integers(1, 21))
        r = int(rng.integers(1, k + 1))
        xs = rng.normal(0.0, float(rng.choice([0.1, 1.0, 100.0])), size=k + r + 1)
        rec = oracles.lemma_window_max(xs, k, r)
        fails += 0 if rec.holds else 1
        worst_margin = min(worst_margin, rec.range_bound - rec.total_variation)
    results.append(CheckResult(
        "oracles.window_max_inequality", fails == 0, worst_margin,
        f"{fails} violations in {n_random} random instances"))

    fails = 0
    worst_margin = math.inf
    for _ in range(n_random):
        n = int(rng.integers(1, 13))
        xs = rng.normal(0.0, float(rng.choice([0.01, 1.0, 1000.0])), size=n)
        rec = oracles.lemma_max_mean_gap(xs)
        fails += 0 if rec.holds else 1
        worst_margin = min(worst_margin, rec.lhs - rec.rhs)
    results.append(CheckResult(
        "oracles.max_mean_gap_inequality", fails == 0, worst_margin,
        f"{fails} violations in {n_random} random instances"))

    grid = np.arange(-50.0, 50.0, 1e-3)
    grid_fails = sum(0 if oracles.lemma_cosh(float(x)).holds else 1 for x in grid)
    rand_x = rng.normal(0.0, 1.0, size=n_random) * np.exp(rng.uniform(-3, 7, size=n_random))
    rand_fails = sum(0 if oracles.lemma_cosh(float(x)).holds else 1 for x in rand_x)
    results.append(CheckResult(
        "oracles.cosh_inequality", grid_fails + rand_fails == 0,
        float(-(grid_fails + rand_fails)),
        f"{grid_fails} grid / {rand_fails} random violations"))

    fails = 0
    worst_margin = math.inf
    for _ in range(n_random):
        n = int(rng.integers(1, 13))
        xs = rng.normal(0.0, float(rng.choice([0.01, 1.0, 1000.0])), size=n)
        rec = oracles.lemma_logsumexp_gap(xs)
        fails += 0 if rec.holds else 1
        worst_margin = min(worst_margin, rec.lhs - rec.rhs)
    results.append(CheckResult(
        "oracles.logsumexp_gap_inequality", fails == 0, worst_margin,
        f"{fails} violations in {n_random} random instances"))
    return results


def run_suite(which: str, *, seed: int = 1, quick: bool = False,
              include_broken: bool = False) -> list[CheckResult]:
    n_samples = 10_000 if quick else 100_000
    n_seeds = 5 if quick else 20
    n_oracle_seeds = 10 if quick else 50
    n_random = 10_000 if quick else 100_000
    results: list[CheckResult] = []
    if which in ("driving", "all"):
        results += verify_driving(seed=seed, n_samples=n_samples,
                                  include_broken=include_broken)
    if which in ("walk", "all"):
        results += verify_walk(seed=seed + 1, n_seeds=n_seeds)
    if which in ("oracles", "all"):
        results += verify_oracles(seed=seed + 2, n_seeds=n_oracle_seeds,
                                  n_random=n_random)
    return results
