"""Local update rules: phi(neighbor heights, noise) -> new height.

Every rule is equivariant under constant height shifts, coordinatewise
monotone in the neighbor heights, and Lipschitz in the noise argument with a
declared constant L.  Those three properties are what the whole verification
suite leans on, so `check_axioms` probes them with randomized inputs.

Height vectors use the canonical stencil layout from `lattice`
(origin, +e1, -e1, ..., +ed, -ed).  Spatial gradients are probability
vectors over that layout: entries are nonnegative and sum to one.  At kinks
of the piecewise-smooth rules the gradient uses a documented tie-break
(full mass on the lowest-canonical-index argmax/argmin), which is a valid
measurable selection because ties have probability zero under continuous
noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .lattice import Neighborhood, neighborhood

SQRT_2PI = math.sqrt(2.0 * math.pi)
INV_SQRT_2PI = 1.0 / SQRT_2PI


def _phi_cdf(z):
    return ndtr(z)


def _phi_pdf(z):
    return np.exp(-0.5 * np.square(z)) * INV_SQRT_2PI


@dataclass(frozen=True)
class NoiseTransform:
    """A nondecreasing Lipschitz map applied to the raw Gaussian variate.

    This is how non-Gaussian noise laws enter: anything expressible as a
    Lipschitz function of a Gaussian is admissible.
    """

    kind: str
    lipschitz: float
    fn: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]

    def __call__(self, z):
        return self.fn(z)


def identity_transform() -> NoiseTransform:
    return NoiseTransform(
        kind="identity",
        lipschitz=1.0,
        fn=lambda z: np.asarray(z, dtype=np.float64) + 0.0,
        deriv=lambda z: np.ones_like(np.asarray(z, dtype=np.float64)),
    )


def gaussian_cdf_transform() -> NoiseTransform:
    """Standard normal CDF: pushes the noise to Uniform[0,1], Lipschitz 1/sqrt(2*pi)."""
    return NoiseTransform(
        kind="gaussian_cdf",
        lipschitz=INV_SQRT_2PI,
        fn=_phi_cdf,
        deriv=_phi_pdf,
    )


def centered_cdf_transform() -> NoiseTransform:
    """sqrt(2*pi) * (CDF(z) - 1/2): mean-zero bounded noise with Lipschitz constant 1."""
    return NoiseTransform(
        kind="custom",
        lipschitz=1.0,
        fn=lambda z: SQRT_2PI * (_phi_cdf(z) - 0.5),
        deriv=lambda z: np.exp(-0.5 * np.square(np.asarray(z, dtype=np.float64))),
    )


TRANSFORMS = {
    "identity": identity_transform,
    "gaussian_cdf": gaussian_cdf_transform,
    "centered_cdf": centered_cdf_transform,
}


class DrivingFunction:
    """Base contract for an update rule.

    Subclasses implement `evaluate_many` (vectorized), `spatial_gradient`
    and `noise_derivative`.  `kind` identifies the rule to the engine's
    fast step kernels.
    """

    kind: str = "custom"
    smoothness_class: str = "smooth"

    def __init__(self, d: int, lipschitz_L: float):
        if d < 1:
            raise ValueError(f"dimension must be >= 1, got {d}")
        if lipschitz_L <= 0:
            raise ValueError("declared Lipschitz constant must be positive")
        self.d = d
        self.lipschitz_L = float(lipschitz_L)
        self.hood: Neighborhood = neighborhood(d)

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, u, z: float) -> float:
        u = self._check_u(u)
        return float(self.evaluate_many(u[None, :], np.array([z], dtype=np.float64))[0])

    def evaluate_many(self, U: np.ndarray, Z: np.ndarray) -> np.ndarray:
        """Vectorized evaluation: U has shape (n, 2d+1), Z has shape (n,)."""
        raise NotImplementedError

    def spatial_gradient(self, u, z: float) -> np.ndarray:
        """Derivative of the update in each neighbor height; a probability
        vector over the canonical stencil layout."""
        raise NotImplementedError

    def noise_derivative(self, u, z: float) -> float:
        """Derivative of the update in the noise argument; bounded by L."""
        raise NotImplementedError

    # -- helpers ------------------------------------------------------------

    def _check_u(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.hood.size,):
            raise ValueError(
                f"height vector must have length {self.hood.size} "
                f"(canonical stencil order), got shape {u.shape}"
            )
        return u

    def _check_U(self, U: np.ndarray) -> np.ndarray:
        U = np.asarray(U, dtype=np.float64)
        if U.ndim != 2 or U.shape[1] != self.hood.size:
            raise ValueError(f"batch of height vectors must be (n, {self.hood.size})")
        return U


class RandomDeposition(DrivingFunction):
    """Each column grows independently: new height = own height + F(z)."""

    kind = "random_deposition"
    smoothness_class = "smooth"

    def __init__(self, transform: NoiseTransform, d: int):
        super().__init__(d, transform.lipschitz)
        self.transform = transform

    def evaluate_many(self, U, Z):
        U = self._check_U(U)
        return U[:, 0] + self.transform(np.asarray(Z, dtype=np.float64))

    def spatial_gradient(self, u, z):
        self._check_u(u)
        g = np.zeros(self.hood.size)
        g[0] = 1.0
        return g

    def noise_derivative(self, u, z):
        self._check_u(u)
        return float(self.transform.deriv(z))


class Rsos(DrivingFunction):
    """Simultaneous constrained-growth rule.

    With w = CDF(z) uniform in (0,1), the new height is the w-quantile of the
    interval [ring max - 1, ring min + 1]; the spread is clamped to [0, 2] so
    the rule is defined for arbitrary inputs.  Realized surfaces keep every
    two-step neighbor gap at most 2, so the clamp never binds in simulation.
    The origin coordinate is ignored.
    """

    kind = "rsos"
    smoothness_class = "piecewise-smooth"

    def __init__(self, d: int):
        super().__init__(d, 4.0 * INV_SQRT_2PI)

    def evaluate_many(self, U, Z):
        U = self._check_U(U)
        ring = U[:, 1:]
        big = ring.max(axis=1)
        small = ring.min(axis=1)
        w = _phi_cdf(np.asarray(Z, dtype=np.float64))
        lo = big - 1.0
        hi = small + 1.0
        v = w * lo + (1.0 - w) * hi
        # same op order as the step kernels; the clamp keeps the convex
        # combination inside the admissible interval under rounding
        v = np.maximum(v, lo)
        v = np.minimum(v, hi)
        spread = big - small
        return np.where(spread <= 2.0, v, hi)

    def spatial_gradient(self, u, z):
        u = self._check_u(u)
        ring = u[1:]
        i_max = int(np.argmax(ring)) + 1
        i_min = int(np.argmin(ring)) + 1
        g = np.zeros(self.hood.size)
        spread = float(ring.max() - ring.min())
        if spread > 2.0:
            g[i_min] = 1.0
            return g
        # clamp slope taken as 1 at the kink points (right-continuous choice)
        w = float(_phi_cdf(z))
        g[i_max] += w
        g[i_min] += 1.0 - w
        return g

    def noise_derivative(self, u, z):
        u = self._check_u(u)
        ring = u[1:]
        spread = float(np.clip(ring.max() - ring.min(), 0.0, 2.0))
        return float(_phi_pdf(z) * (spread - 2.0))


class Ballistic(DrivingFunction):
    """Sticky deposition: max of (own height + uniform brick) and the ring.

    Stays within 1 of the plain stencil maximum (the brick height lies in
    [0, 1]): an envelope property with constants (1, 0).
    """

    kind = "ballistic"
    smoothness_class = "piecewise-smooth"
    max_envelope_k1 = 1.0
    max_envelope_k2 = 0.0

    def __init__(self, d: int):
        super().__init__(d, INV_SQRT_2PI)

    def evaluate_many(self, U, Z):
        U = self._check_U(U)
        acc = U[:, 0] + _phi_cdf(np.asarray(Z, dtype=np.float64))
        for j in range(1, self.hood.size):
            acc = np.maximum(acc, U[:, j])
        return acc

    def _branch_values(self, u, z):
        vals = u.copy()
        vals[0] = u[0] + float(_phi_cdf(z))
        return vals

    def spatial_gradient(self, u, z):
        u = self._check_u(u)
        vals = self._branch_values(u, z)
        g = np.zeros(self.hood.size)
        g[int(np.argmax(vals))] = 1.0  # ties go to the lowest canonical index
        return g

    def noise_derivative(self, u, z):
        u = self._check_u(u)
        vals = self._branch_values(u, z)
        if int(np.argmax(vals)) == 0:
            return float(_phi_pdf(z))
        return 0.0


class Lpp(DrivingFunction):
    """Directed path maximum: ring max over the positive axes, plus F(z)."""

    kind = "lpp"
    smoothness_class = "piecewise-smooth"

    def __init__(self, transform: NoiseTransform, d: int):
        super().__init__(d, transform.lipschitz)
        self.transform = transform

    def evaluate_many(self, U, Z):
        U = self._check_U(U)
        pos = self.hood.pos_indices
        acc = U[:, pos[0]]
        for j in pos[1:]:
            acc = np.maximum(acc, U[:, j])
        return acc + self.transform(np.asarray(Z, dtype=np.float64))

    def spatial_gradient(self, u, z):
        u = self._check_u(u)
        pos = self.hood.pos_indices
        vals = u[list(pos)]
        g = np.zeros(self.hood.size)
        g[pos[int(np.argmax(vals))]] = 1.0  # ties: lowest axis wins
        return g

    def noise_derivative(self, u, z):
        self._check_u(u)
        return float(self.transform.deriv(z))


class Polymer(DrivingFunction):
    """Smoothed path maximum at inverse temperature beta:
    (1/beta) * log sum over the ring of exp(beta * height), plus F(z).

    Evaluation is max-shifted so large heights cannot overflow.
    """

    kind = "polymer"
    smoothness_class = "smooth"

    def __init__(self, beta: float, transform: NoiseTransform, d: int):
        if beta <= 0:
            raise ValueError(f"beta must be positive, got {beta}")
        super().__init__(d, transform.lipschitz)
        self.beta = float(beta)
        self.transform = transform

    def evaluate_many(self, U, Z):
        U = self._check_U(U)
        ring = U[:, 1:]
        big = ring.max(axis=1)
        s = np.exp(self.beta * (ring - big[:, None])).sum(axis=1)
        return big + np.log(s) / self.beta + self.transform(np.asarray(Z, dtype=np.float64))

    def spatial_gradient(self, u, z):
        u = self._check_u(u)
        ring = u[1:]
        e = np.exp(self.beta * (ring - ring.max()))
        g = np.zeros(self.hood.size)
        g[1:] = e / e.sum()
        return g

    def noise_derivative(self, u, z):
        self._check_u(u)
        return float(self.transform.deriv(z))


# -- constructors (the model registry uses these names) ----------------------


def make_random_deposition(transform: NoiseTransform, d: int) -> RandomDeposition:
    return RandomDeposition(transform, d)


def make_rsos(d: int) -> Rsos:
    return Rsos(d)


def make_ballistic(d: int) -> Ballistic:
    return Ballistic(d)


def make_lpp(transform: NoiseTransform, d: int) -> Lpp:
    return Lpp(transform, d)


def make_polymer(beta: float, transform: NoiseTransform, d: int) -> Polymer:
    return Polymer(beta, transform, d)


class BrokenMonotone(DrivingFunction):
    """Deliberately defective rule (decreasing in one neighbor height).

    Exists so the verification harness can prove it detects axiom
    violations; never use it for simulation.
    """

    kind = "broken"

    def __init__(self, d: int = 1):
        super().__init__(d, 1.0)

    def evaluate_many(self, U, Z):
        U = self._check_U(U)
        return U[:, 0] - U[:, 1] + np.asarray(Z, dtype=np.float64)

    def spatial_gradient(self, u, z):
        self._check_u(u)
        g = np.zeros(self.hood.size)
        g[0] = 1.0
        g[1] = -1.0
        return g

    def noise_derivative(self, u, z):
        self._check_u(u)
        return 1.0


def make_broken_fixture(d: int = 1) -> BrokenMonotone:
    return BrokenMonotone(d)


# -- randomized axiom certification ------------------------------------------


@dataclass
class AxiomReport:
    """Worst-case violations observed while fuzzing one driving function."""

    samples_tested: int
    max_equivariance_violation: float
    max_monotonicity_violation: float
    lipschitz_z_estimate: float
    linf_lipschitz_estimate: float
    max_equivariance_violation_stress: float


def check_axioms(phi: DrivingFunction, n_samples: int, rng_seed: int) -> AxiomReport:
    """Probe shift-equivariance, monotonicity and the two Lipschitz bounds.

    Main samples draw heights from centered Gaussians with spread 10.  A
    boundary-stress batch places coordinates at exactly +/-1e6 to catch
    clamp and overflow bugs; its equivariance defect is tracked separately
    because float64 re-association noise at that magnitude is ~1e-10 even
    for a correct implementation.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(rng_seed)
    m = phi.hood.size

    n_stress = min(256, n_samples)
    U = rng.normal(0.0, 10.0, size=(n_samples, m))
    U_stress = 1e6 * rng.choice([-1.0, 1.0], size=(n_stress, m))
    Z = rng.normal(size=n_samples)
    Z2 = rng.normal(size=n_samples)
    C = rng.normal(0.0, 10.0, size=n_samples)

    base = phi.evaluate_many(U, Z)

    # equivariance: phi(u + c, z) - phi(u, z) - c == 0
    shifted = phi.evaluate_many(U + C[:, None], Z)
    equiv = float(np.abs(shifted - base - C).max())

    z_s = rng.normal(size=n_stress)
    c_s = rng.normal(0.0, 10.0, size=n_stress)
    base_s = phi.evaluate_many(U_stress, z_s)
    shifted_s = phi.evaluate_many(U_stress + c_s[:, None], z_s)
    equiv_stress = float(np.abs(shifted_s - base_s - c_s).max())

    # monotonicity: a nonnegative bump of one coordinate never lowers phi
    bump_idx = rng.integers(0, m, size=n_samples)
    bumps = np.zeros_like(U)
    bumps[np.arange(n_samples), bump_idx] = np.abs(rng.normal(0.0, 5.0, size=n_samples))
    bumped = phi.evaluate_many(U + bumps, Z)
    mono = float(np.maximum(base - bumped, 0.0).max())
    bumped_s = phi.evaluate_many(U_stress + np.abs(rng.normal(0, 5, size=(n_stress, m))), z_s)
    mono = max(mono, float(np.maximum(base_s - bumped_s, 0.0).max()))

    # Lipschitz in the noise argument
    dz = np.abs(Z - Z2)
    ok = dz >= 1e-6  # avoid amplifying rounding noise through a tiny gap
    other = phi.evaluate_many(U, Z2)
    lip_z = float((np.abs(other - base)[ok] / dz[ok]).max())

    # joint sup-norm Lipschitz bound (constant L + 1)
    V = rng.normal(0.0, 10.0, size=(n_samples, m))
    Zv = rng.normal(size=n_samples)
    dist = np.maximum(np.abs(U - V).max(axis=1), np.abs(Z - Zv))
    okv = dist >= 1e-6
    fv = phi.evaluate_many(V, Zv)
    lip_inf = float((np.abs(fv - base)[okv] / dist[okv]).max())

    return AxiomReport(
        samples_tested=n_samples,
        max_equivariance_violation=equiv,
        max_monotonicity_violation=mono,
        lipschitz_z_estimate=lip_z,
        linf_lipschitz_estimate=lip_inf,
        max_equivariance_violation_stress=equiv_stress,
    )
