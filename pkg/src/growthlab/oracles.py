"""Independent ground truths: naive path enumeration and scalar inequalities.

The directed-max and smoothed-sum recursions in the engine are, by exact
identity, the maximum (resp. softmax) of weight sums over lattice paths in a
shared random environment.  The enumerators here recompute those quantities
by walking every path, using exactly the index maps that make the identity
hold realization by realization:

    directed max:  weight at lattice point y is F(z_{t - |y|_1, x + y})
    smoothed sum:  weight at step i, point p is F(z_{t - i, x + p})

Keeping the oracle naive is the point; the engine IS the clever algorithm.

The scalar utilities check four standalone inequalities used by the
fluctuation analysis; each returns both sides so tests can assert the
inequality and report margins.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .driving import NoiseTransform
from .lattice import Offset, SiteCoord
from .noise import NoiseField

_MAX_PATHS = 10_000_000


@dataclass(frozen=True)
class PathEnvironment:
    """Vertex weights visible to length-t paths from the origin.

    For the directed-max model keys are lattice points in the nonnegative
    orthant with |y|_1 < t; for the smoothed-sum model keys are (step, point)
    pairs with 0 <= step < t.
    """

    d: int
    t: int
    weights: dict


def lpp_environment(noise: NoiseField, transform: NoiseTransform, t: int,
                    center: Offset) -> PathEnvironment:
    d = len(center)
    weights = {}
    for y in itertools.product(*(range(t) for _ in range(d))):
        r = sum(y)
        if r >= t:
            continue
        z = noise.gaussian_at(SiteCoord(t=t - r, x=tuple(center[i] + y[i] for i in range(d))))
        weights[y] = float(transform(z))
    return PathEnvironment(d=d, t=t, weights=weights)


def polymer_environment(noise: NoiseField, transform: NoiseTransform, t: int,
                        center: Offset) -> PathEnvironment:
    d = len(center)
    weights = {}
    for i in range(t):
        for off in itertools.product(range(-i, i + 1), repeat=d):
            if sum(abs(c) for c in off) > i or (sum(abs(c) for c in off) - i) % 2 != 0:
                continue
            z = noise.gaussian_at(SiteCoord(t=t - i, x=tuple(center[k] + off[k] for k in range(d))))
            weights[(i, off)] = float(transform(z))
    return PathEnvironment(d=d, t=t, weights=weights)


def lpp_bruteforce(env: PathEnvironment, t: int) -> float:
    """Exact maximum over all d^t monotone paths of the weight sum over the
    first t path points."""
    d = env.d
    if d**t > _MAX_PATHS:
        raise ValueError(f"instance too large: {d}^{t} paths")
    best = -math.inf
    for steps in itertools.product(range(d), repeat=t):
        pos = [0] * d
        total = 0.0
        for axis in steps:
            total += env.weights[tuple(pos)]
            pos[axis] += 1
        best = max(best, total)
    return best


def polymer_bruteforce(env: PathEnvironment, t: int, beta: float) -> float:
    """Exact (1/beta) log of the sum over all (2d)^t nearest-neighbor paths
    of exp(beta * path weight), via max-shifted summation."""
    d = env.d
    if (2 * d) ** t > _MAX_PATHS:
        raise ValueError(f"instance too large: {2 * d}^{t} paths")
    moves = []
    for axis in range(d):
        for sign in (1, -1):
            moves.append(tuple(sign if k == axis else 0 for k in range(d)))
    energies = []
    for steps in itertools.product(moves, repeat=t):
        pos = tuple(0 for _ in range(d))
        total = 0.0
        for i, mv in enumerate(steps):
            total += env.weights[(i, pos)]
            pos = tuple(pos[k] + mv[k] for k in range(d))
        energies.append(beta * total)
    arr = np.array(energies)
    big = arr.max()
    return float(big + np.log(np.exp(arr - big).sum())) / beta


# -- scalar inequality utilities ----------------------------------------------


class WindowMaxRecord(NamedTuple):
    maxima: tuple
    i_star: int
    unimodal: bool
    total_variation: float  # sum |m_i - m_{i+1}|
    range_bound: float      # 2 * max |x_i - x_j|

    @property
    def holds(self) -> bool:
        return self.unimodal and self.total_variation <= self.range_bound


def lemma_window_max(xs, k: int, r: int) -> WindowMaxRecord:
    """Sliding maxima m_i = max(x_i..x_{i+k}) for i = 0..r with r <= k:
    they decrease to some index then increase, and their total variation is
    at most twice the data range."""
    xs = np.asarray(xs, dtype=np.float64)
    if not 1 <= r <= k:
        raise ValueError(f"need 1 <= r <= k, got r={r}, k={k}")
    if xs.shape != (k + r + 1,):
        raise ValueError(f"need exactly k + r + 1 = {k + r + 1} values")
    m = np.array([xs[i:i + k + 1].max() for i in range(r + 1)])
    i_star = int(np.argmin(m))
    unimodal = bool(np.all(np.diff(m[:i_star + 1]) <= 0)
                    and np.all(np.diff(m[i_star:]) >= 0))
    tv = float(np.abs(np.diff(m)).sum())
    bound = 2.0 * float(xs.max() - xs.min())
    return WindowMaxRecord(maxima=tuple(m), i_star=i_star, unimodal=unimodal,
                           total_variation=tv, range_bound=bound)


class InequalityPair(NamedTuple):
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs >= self.rhs


def lemma_max_mean_gap(xs) -> InequalityPair:
    """max - mean dominates (2/n^3) * sum of all pairwise absolute gaps."""
    xs = np.asarray(xs, dtype=np.float64)
    n = xs.size
    if n < 1:
        raise ValueError("need at least one value")
    lhs = float(xs.max() - xs.mean())
    pair_abs = float(np.abs(xs[:, None] - xs[None, :]).sum()) / 2.0
    rhs = 2.0 / n**3 * pair_abs
    return InequalityPair(lhs=lhs, rhs=rhs)


class CoshRecord(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def lemma_cosh(x: float) -> CoshRecord:
    """cosh(x) dominates exp(min(|x|, x^2) / 4); compared in the log domain
    beyond |x| ~ 700 where cosh overflows (the log comparison is noisy near
    zero, so it is used only where the direct one cannot be)."""
    ax = abs(float(x))
    log_rhs = min(ax, ax * ax) / 4.0
    if ax > 700.0:
        log_lhs = ax + math.log1p(math.exp(-2.0 * ax)) - math.log(2.0)
        return CoshRecord(lhs=math.inf, rhs=math.inf, holds=log_lhs >= log_rhs)
    lhs = math.cosh(x)
    rhs = math.exp(log_rhs)
    return CoshRecord(lhs=lhs, rhs=rhs, holds=lhs >= rhs)


def lemma_logsumexp_gap(xs) -> InequalityPair:
    """log of the average exponential minus the average dominates
    (1/4n^3) * min(sum |x_i - x_j|, sum (x_i - x_j)^2) over pairs i < j.

    Computed in a mean-shifted frame so the left side survives cancellation.
    """
    xs = np.asarray(xs, dtype=np.float64)
    n = xs.size
    if n < 1:
        raise ValueError("need at least one value")
    y = xs - xs.mean()
    big = y.max()
    lhs = float(big + np.log(np.exp(y - big).sum()) - math.log(n) - y.mean())
    diffs = xs[:, None] - xs[None, :]
    sum_abs = float(np.abs(diffs).sum()) / 2.0
    sum_sq = float(np.square(diffs).sum()) / 2.0
    rhs = min(sum_abs, sum_sq) / (4.0 * n**3)
    return InequalityPair(lhs=lhs, rhs=rhs)
