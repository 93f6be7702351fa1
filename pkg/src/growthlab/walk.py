"""Exact derivatives of the height in each noise variable.

The derivative of f(t, x) with respect to the noise at (s, y) factorizes as

    P(S_s = y) * d/dz phi(stencil of f(s-1, .) at y, z_{s,y})

where S is a walk started at x at time t that steps backwards through time,
moving across the stencil with probabilities given by the spatial gradient
of the update rule evaluated at the realized field.  Because the gradients
are exact probability vectors, the whole law of the walk can be computed by
sparse dynamic programming over time slices with no sampling error; that is
what makes this module usable as an oracle.

The factorization assumes a differentiable rule.  For the piecewise-smooth
rules the tie-broken gradient gives an almost-everywhere version that is
reported but only hard-asserted for smooth rules.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .driving import DrivingFunction
from .engine import SimulationPlan, Trajectory, simulate
from .lattice import Offset, SiteCoord


@dataclass(frozen=True)
class WalkDistribution:
    """Per-time-slice law of the backward walk started at (t, x).

    slices[s] maps lattice point -> P(S_s = y); slice t is the point mass at
    x and every slice sums to 1 up to accumulated rounding (<= 1e-10).
    Support at time s stays within taxicab distance t - s of x.
    """

    start: tuple[int, Offset]
    slices: tuple[dict, ...]

    def mass(self, s: int, y: Offset) -> float:
        return self.slices[s].get(tuple(y), 0.0)

    def slice_total(self, s: int) -> float:
        return math.fsum(self.slices[s].values())


@dataclass(frozen=True)
class DerivativeRecord:
    site: tuple[int, Offset]
    walk_value: float
    fd_value: float

    @property
    def relative_error(self) -> float:
        return abs(self.walk_value - self.fd_value) / max(abs(self.fd_value), 1e-12)


def _stencil_at(traj: Trajectory, phi: DrivingFunction, s: int, y: Offset):
    u = traj.window(s - 1).stencil_heights(y, phi.hood)
    z = traj.noise.gaussian_at(SiteCoord(t=s, x=tuple(y)))
    return u, z


def walk_distribution(traj: Trajectory, phi: DrivingFunction,
                      start: tuple[int, Offset]) -> WalkDistribution:
    """Push the point mass at the start back through the realized gradients."""
    t, x = start[0], tuple(start[1])
    if not 0 <= t < len(traj.windows):
        raise ValueError(f"trajectory does not cover time {t}")
    d = phi.d
    slices: list[dict] = [dict() for _ in range(t + 1)]
    slices[t][x] = 1.0
    for s in range(t, 0, -1):
        nxt = slices[s - 1]
        for y, p in slices[s].items():
            u, z = _stencil_at(traj, phi, s, y)
            g = phi.spatial_gradient(u, z)
            for off, w in zip(phi.hood.offsets_full, g):
                if w == 0.0:
                    continue
                dest = tuple(y[i] + off[i] for i in range(d))
                nxt[dest] = nxt.get(dest, 0.0) + p * w
    return WalkDistribution(start=(t, x), slices=tuple(slices))


def derivative_via_walk(traj: Trajectory, phi: DrivingFunction,
                        start: tuple[int, Offset], site: tuple[int, Offset],
                        dist: WalkDistribution | None = None) -> float:
    """Walk-mass times noise-derivative at the realized field."""
    t, x = start[0], tuple(start[1])
    s, y = site[0], tuple(site[1])
    if not 1 <= s <= t:
        raise ValueError(f"site time must satisfy 1 <= s <= {t}, got {s}")
    if sum(abs(y[i] - x[i]) for i in range(phi.d)) > t - s:
        return 0.0
    if dist is None:
        dist = walk_distribution(traj, phi, (t, x))
    p = dist.mass(s, y)
    if p == 0.0:
        return 0.0
    u, z = _stencil_at(traj, phi, s, y)
    return p * phi.noise_derivative(u, z)


def derivative_via_fd(plan: SimulationPlan, phi: DrivingFunction,
                      start: tuple[int, Offset], site: tuple[int, Offset],
                      eps: float = 1e-5) -> float:
    """Centered finite difference of two full re-simulations with the noise
    shifted by +/-eps at `site`.

    Independent of the walk representation by construction.  For a
    piecewise-smooth rule a perturbation that straddles a kink makes the two
    one-sided differences disagree; that case is warned about and the
    centered value still returned.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    t, x = start[0], tuple(start[1])
    s, y = site[0], tuple(site[1])
    probe = tuple(x[i] - plan.center[i] for i in range(plan.d))
    fd_plan = SimulationPlan(model=phi, t_max=t, seed=plan.seed, replica=plan.replica,
                             probes=(probe,), center=plan.center)
    base = fd_plan.noise_field()
    site_coord = SiteCoord(t=s, x=y)
    f_plus = simulate(fd_plan, noise=base.with_overlay(site_coord, +eps)).probe_values[0]
    f_minus = simulate(fd_plan, noise=base.with_overlay(site_coord, -eps)).probe_values[0]
    centered = (f_plus - f_minus) / (2.0 * eps)
    if phi.smoothness_class != "smooth":
        f0 = simulate(fd_plan, noise=base).probe_values[0]
        d_plus = (f_plus - f0) / eps
        d_minus = (f0 - f_minus) / eps
        scale = max(abs(d_plus), abs(d_minus), 1.0)
        if abs(d_plus - d_minus) > 1e-3 * scale:
            warnings.warn(
                f"one-sided differences disagree at site {site}: the "
                f"perturbation likely crosses a kink of the update rule",
                stacklevel=2,
            )
    return float(centered)


def cone_sites(start: tuple[int, Offset], d: int):
    """All (s, y) with 1 <= s <= t and |y - x|_1 <= t - s."""
    t, x = start[0], tuple(start[1])

    def ball(radius: int, dims: int):
        if dims == 0:
            yield ()
            return
        for c in range(-radius, radius + 1):
            for rest in ball(radius - abs(c), dims - 1):
                yield (c,) + rest

    for s in range(1, t + 1):
        for off in ball(t - s, d):
            yield s, tuple(x[i] + off[i] for i in range(d))


def influence_norm(traj: Trajectory, phi: DrivingFunction,
                   start: tuple[int, Offset]) -> float:
    """Sum of squared noise derivatives over the whole dependence cone.

    Bounded by L^2 t: the walk visits one site per slice, so each slice
    contributes at most L^2 times a sub-probability squared mass.
    """
    t, x = start[0], tuple(start[1])
    dist = walk_distribution(traj, phi, (t, x))
    total = 0.0
    for s in range(1, t + 1):
        for y, p in dist.slices[s].items():
            if p == 0.0:
                continue
            u, z = _stencil_at(traj, phi, s, y)
            dz = phi.noise_derivative(u, z)
            total += (p * dz) ** 2
    return total
