"""Throughput of the compiled step kernels against the numpy fallback.

Two views:
  * raw kernel rate (site-updates/s) on a resident replica batch, which
    isolates the fused loops from noise generation, and
  * end-to-end ensemble rate including noise generation and statistics.

Usage: python benchmarks/bench_backends.py [--quick]
"""

import argparse
import time

import numpy as np
from scipy.special import ndtr

from growthlab import _kernels
from growthlab.driving import centered_cdf_transform, make_polymer
from growthlab.engine import SimulationPlan, run_ensemble
from growthlab.noise import NoiseField
from growthlab.verify import standard_models


def bench_kernel(kind, beta, n, w, steps, backend) -> float:
    _kernels.set_backend(backend)
    rng = np.random.default_rng(0)
    h = rng.normal(size=(n, w))
    aux = ndtr(rng.normal(size=(n, w - 2)))
    out = np.empty((n, w - 2))
    upd = np.ones(w - 2, dtype=bool) if kind == "rsos_alternating" else None
    _kernels.step(kind, h, aux, out, d=1, beta=beta, upd=upd)  # warm up
    t0 = time.perf_counter()
    for _ in range(steps):
        _kernels.step(kind, h, aux, out, d=1, beta=beta, upd=upd)
    dt = time.perf_counter() - t0
    return n * (w - 2) * steps / dt


def bench_noise(n, w, steps) -> float:
    base = NoiseField(seed=1)
    replicas = np.arange(n, dtype=np.uint64)
    base.gaussian_block_batch(1, (0,), (w,), replicas)
    t0 = time.perf_counter()
    for s in range(steps):
        base.gaussian_block_batch(s + 1, (0,), (w,), replicas)
    return n * w * steps / (time.perf_counter() - t0)


def bench_ensemble(model, t, n, backend) -> float:
    _kernels.set_backend(backend)
    plan = SimulationPlan(model=model, t_max=t, seed=3, probes=((0,),))
    t0 = time.perf_counter()
    run_ensemble(plan, n, parallelism=1)
    return time.perf_counter() - t0


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true")
    args = parser.parse_args()
    if "compiled" not in _kernels.available_backends():
        raise SystemExit("compiled kernels not built; nothing to compare")

    n, w = (1024, 257) if args.quick else (4096, 513)
    steps = 20 if args.quick else 100
    kinds = ["random_deposition", "ballistic", "lpp", "rsos",
             "rsos_alternating", "polymer"]
    print(f"kernel rates on a ({n} x {w}) batch, {steps} steps "
          f"[site-updates/s]:")
    print(f"{'kernel':<20}{'numpy':>14}{'compiled':>14}{'speedup':>9}")
    for kind in kinds:
        beta = 1.0 if kind == "polymer" else None
        r_np = bench_kernel(kind, beta, n, w, steps, "numpy")
        r_cy = bench_kernel(kind, beta, n, w, steps, "compiled")
        print(f"{kind:<20}{r_np:>14.3e}{r_cy:>14.3e}{r_cy / r_np:>8.2f}x")

    print(f"\nnoise generation: {bench_noise(n, w, steps):.3e} variates/s "
          "(shared by both backends)")

    t, reps = (32, 2000) if args.quick else (64, 10000)
    models = dict(standard_models(d=1))
    models["polymer"] = make_polymer(1.0, centered_cdf_transform(), 1)
    print(f"\nend-to-end ensembles (t={t}, n={reps}, single worker) [s]:")
    print(f"{'model':<20}{'numpy':>10}{'compiled':>10}{'speedup':>9}")
    for name, model in models.items():
        s_np = bench_ensemble(model, t, reps, "numpy")
        s_cy = bench_ensemble(model, t, reps, "compiled")
        print(f"{name:<20}{s_np:>10.2f}{s_cy:>10.2f}{s_np / s_cy:>8.2f}x")
    _kernels.set_backend("auto")


if __name__ == "__main__":
    main()
