"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with `pytest tests/test_acceptance.py -v -s`.  Every tolerance is pinned
here; the statistical checks use fixed seeds so the suite is reproducible.
"""

import math
import time

import numpy as np
import pytest

from growthlab import verify
from growthlab.cli import main
from growthlab.driving import (
    centered_cdf_transform,
    identity_transform,
    make_ballistic,
    make_lpp,
    make_polymer,
    make_random_deposition,
    make_rsos,
)
from growthlab.engine import (
    AlternatingRsos,
    SimulationPlan,
    run_ensemble,
    simulate_rsos_alternating,
    simulate_rsos_simultaneous,
)
from growthlab.estimators import (
    check_beta_le_alpha,
    estimate_alpha,
    estimate_beta,
    mgf_check,
    superconcentration_trend,
    tail_exceedance,
)
from growthlab.stats import EnsembleStats

SEED = 20240811


def _bound_models():
    unit = centered_cdf_transform()
    return {
        "rsos": make_rsos(1),
        "ballistic": make_ballistic(1),
        "polymer": make_polymer(1.0, unit, 1),
        "lpp": make_lpp(unit, 1),
    }


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


def test_criterion_1_exact_variance_calibration():
    t0 = time.perf_counter()
    rd = make_random_deposition(identity_transform(), 1)
    plan = SimulationPlan(model=rd, t_max=100, seed=SEED, probes=((0,),))
    stats = run_ensemble(plan, 10_000, parallelism=8).probe_stats[(0,)]
    est = estimate_alpha(stats, L=1.0, t=100)
    elapsed = time.perf_counter() - t0
    ok = abs(est.alpha_hat - 1.0) <= 5 * est.se and elapsed < 10.0
    _report(1, ok, f"alpha_hat={est.alpha_hat:.4f} se={est.se:.4f} "
                   f"(true 1.0), runtime {elapsed:.1f}s < 10s")


def test_criterion_2_fluctuation_bound_suite():
    t0 = time.perf_counter()
    t, n = 64, 10_000
    lines = []
    ok = True
    for name, model in _bound_models().items():
        L = model.lipschitz_L
        plan = SimulationPlan(model=model, t_max=t, seed=SEED + 2, probes=((0,),))
        stats = run_ensemble(plan, n, parallelism=8).probe_stats[(0,)]
        alpha = estimate_alpha(stats, L, t)
        a_ok = alpha.alpha_hat <= 1.0 + 5 * alpha.se
        r_list = [k * L * math.sqrt(t) for k in (1, 2, 3)]
        tails = tail_exceedance(stats, r_list, L, t, se_mult=3.0)
        t_ok = all(c.passed for c in tails)
        thetas = [1.0 / (L * math.sqrt(t)), -1.0 / (L * math.sqrt(t))]
        mgfs = mgf_check(stats, thetas, L, t, se_mult=3.0)
        m_ok = all(c.passed for c in mgfs)
        ok = ok and a_ok and t_ok and m_ok
        lines.append(f"{name}: alpha={alpha.alpha_hat:.3f} "
                     f"tails={'ok' if t_ok else 'FAIL'} "
                     f"mgf={'ok' if m_ok else 'FAIL'}")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 180.0
    _report(2, ok, "; ".join(lines) + f"; runtime {elapsed:.1f}s < 180s")


def test_criterion_3_pair_gap_below_variance():
    lines = []
    ok = True
    for name, model in _bound_models().items():
        L = model.lipschitz_L
        for t in (16, 64):
            plan = SimulationPlan(model=model, t_max=t, seed=SEED + 3,
                                  probes=((0,), (1,), (2,)), pairs=((0, 1), (0, 2)))
            res = run_ensemble(plan, 10_000, parallelism=8)
            alpha = estimate_alpha(res.probe_stats[(0,)], L, t)
            for b in ((1,), (2,)):
                beta = estimate_beta(res.pair_stats[((0,), b)], L, t, b)
                rep = check_beta_le_alpha(alpha, beta, se_mult=3.0)
                ok = ok and rep.passed
                lines.append(f"{name} t={t} b={b[0]}: beta={rep.beta_hat:.4f} "
                             f"<= alpha={rep.alpha_hat:.4f} "
                             f"(pair for upper: 1/|log beta|={rep.inv_log_beta:.4f})")
    print()
    for line in lines:
        print("   ", line)
    _report(3, ok, f"{len(lines)} model/t/b combinations, all within 3 pooled SE")


def test_criterion_4_rsos_deterministic_constraints():
    # hard realization bounds (checked inside every step) at t = 256
    alt_plan = SimulationPlan(model=AlternatingRsos(1), t_max=256, seed=SEED + 4,
                              probes=((0,),))
    simulate_rsos_alternating(alt_plan)
    sim_plan = SimulationPlan(model=make_rsos(1), t_max=256, seed=SEED + 4,
                              probes=((0,),))
    simulate_rsos_simultaneous(sim_plan)

    # ensemble second moment of the two-step gap
    t, n = 64, 10_000
    plan = SimulationPlan(model=make_rsos(1), t_max=t, seed=SEED + 4,
                          probes=((0,), (2,)), pairs=((0, 1),))
    pair = run_ensemble(plan, n, parallelism=8).pair_stats[((0,), (2,))]
    sq = np.square(pair.values)
    est = float(sq.mean())
    se = float(sq.std(ddof=1)) / math.sqrt(n)
    realized_max = float(np.abs(pair.values).max())
    ok = realized_max <= 2.0 and est <= 4.0 + 5 * se
    _report(4, ok, f"gap<=1 and two-step<=2 asserted through t=256; "
                   f"E[gap^2]={est:.4f} <= 4 (se {se:.4f}), "
                   f"realized max |gap|={realized_max:.4f} <= 2")


def test_criterion_5_derivative_oracle():
    t0 = time.perf_counter()
    results = verify.verify_walk(seed=SEED + 5, n_seeds=20, t=5, eps=1e-5)
    elapsed = time.perf_counter() - t0
    failed = [r for r in results if not r.passed]
    ok = not failed and elapsed < 60.0
    detail = "; ".join(f"{r.name}: {r.detail}" for r in results)
    _report(5, ok, detail + f"; runtime {elapsed:.1f}s < 60s")


def test_criterion_6_path_oracle_identities():
    t0 = time.perf_counter()
    results = verify.verify_oracles(seed=SEED + 6, n_seeds=50, n_random=0)
    elapsed = time.perf_counter() - t0
    idents = [r for r in results if "identity" in r.name]
    ok = all(r.passed for r in idents) and elapsed < 60.0
    detail = "; ".join(f"{r.name}: {r.detail}" for r in idents)
    _report(6, ok, detail + f"; runtime {elapsed:.1f}s < 60s")


def test_criterion_7_inequality_lemmas():
    t0 = time.perf_counter()
    results = verify.verify_oracles(seed=SEED + 7, n_seeds=0, n_random=100_000)
    elapsed = time.perf_counter() - t0
    lemmas = [r for r in results if "identity" not in r.name]
    ok = all(r.passed for r in lemmas) and len(lemmas) == 4 and elapsed < 30.0
    detail = "; ".join(f"{r.name.split('.')[1]}: {r.detail}" for r in lemmas)
    _report(7, ok, detail + f"; runtime {elapsed:.1f}s < 30s")


def test_criterion_8_superconcentration_trend():
    t0 = time.perf_counter()
    rsos = superconcentration_trend(make_rsos(1), [16, 64, 256], 4000, b=(2,),
                                    seed=SEED + 8, parallelism=8)
    control = superconcentration_trend(make_random_deposition(identity_transform(), 1),
                                       [16, 64, 256], 4000, b=(2,),
                                       seed=SEED + 8, parallelism=8)
    elapsed = time.perf_counter() - t0
    rsos_ok = rsos.alpha_decreasing(3.0) and rsos.beta_decreasing(3.0)
    control_ok = (not control.alpha_decreasing(3.0)) and (not control.beta_decreasing(3.0))
    ok = rsos_ok and control_ok and elapsed < 480.0
    a = [f"{r.alpha.alpha_hat:.4f}" for r in rsos.rows]
    b = [f"{r.beta.beta_hat:.4f}" for r in rsos.rows]
    _report(8, ok, f"rsos alpha {a} decreasing, beta {b} decreasing; "
                   f"control flat; runtime {elapsed:.1f}s < 480s")


def test_criterion_9_determinism_and_merge_order(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("\n".join([
        "model = rsos",
        "d = 1",
        "t_list = [16, 64]",
        "diff_offsets = [[1], [2]]",
        "n_replicas = 3000",
        f"seed = {SEED + 9}",
        f'out_dir = {tmp_path / "p1"}',
    ]) + "\n")
    assert main(["--config", str(cfg), "--parallelism", "1", "ensemble", "--quiet"]) == 0
    assert main(["--config", str(cfg), "--parallelism", "8",
                 "--out", str(tmp_path / "p8"), "ensemble", "--quiet"]) == 0
    identical = ((tmp_path / "p1" / "ensemble.csv").read_bytes()
                 == (tmp_path / "p8" / "ensemble.csv").read_bytes())

    rng = np.random.default_rng(SEED)
    x = rng.normal(size=8192)
    whole = EnsembleStats()
    whole.add_batch(x)
    left, right = EnsembleStats(), EnsembleStats()
    left.add_batch(x[:5000])
    right.add_batch(x[5000:])
    merged = left.merge(right)
    merge_ok = (merged.n == whole.n
                and abs(merged.mean - whole.mean) <= 1e-12 * max(1, abs(whole.mean))
                and abs(merged.m2 - whole.m2) <= 1e-12 * whole.m2
                and abs(merged.m4 - whole.m4) <= 1e-12 * whole.m4
                and np.array_equal(merged.values, x))
    ok = identical and merge_ok
    _report(9, ok, f"byte-identical CSVs across parallelism 1 and 8: {identical}; "
                   f"ordered merge equals single pass: {merge_ok}")
