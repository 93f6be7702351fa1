"""Surface evolution with exact dependence-cone accounting.

A window stores heights on a sup-norm box around a center.  One update
consumes a margin of one cell per side, so after s steps the heights inside
radius R - s are exactly the infinite-lattice values: enlarging the initial
box can never change them.  Plans size the box as t_max + the largest probe
offset, which makes every probe exact at the final time.

The ensemble driver evolves replicas in fixed-size batches through the step
kernels; batches are accumulated in ascending replica order regardless of
how many workers run them, so merged statistics are bit-reproducible across
parallelism settings.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import ndtr

from . import _kernels
from .driving import DrivingFunction
from .lattice import Neighborhood, Offset, neighborhood
from .noise import NoiseField
from .stats import EnsembleStats

CHUNK_REPLICAS = 1024


class ConstraintViolationError(RuntimeError):
    """A realized configuration broke a deterministic model constraint.

    This always signals an implementation bug, never valid data.
    """


class AlternatingRsos:
    """Marker for the parity-alternating constrained-growth rule.

    Not a single-update driving function: even and odd sublattices take
    turns, each updated site drawing uniformly from the interval that keeps
    all neighbor gaps at most 1.  Each site-update consumes one uniform
    variate CDF(z_{t+1,x}); skipped sites consume none.
    """

    kind = "rsos_alternating"

    def __init__(self, d: int):
        if d < 1:
            raise ValueError(f"dimension must be >= 1, got {d}")
        self.d = d
        self.hood: Neighborhood = neighborhood(d)


Model = Union[DrivingFunction, AlternatingRsos]


@dataclass(frozen=True)
class FieldWindow:
    """Snapshot of surface heights on a sup-norm box at one time.

    Heights within `valid_radius` of the center equal the infinite-lattice
    values exactly; treat instances as immutable.
    """

    t: int
    center: Offset
    radius: int
    valid_radius: int
    heights: np.ndarray

    def __post_init__(self) -> None:
        d = len(self.center)
        if self.heights.shape != (2 * self.radius + 1,) * d:
            raise ValueError("heights array does not match the declared radius")
        if self.valid_radius > self.radius:
            raise ValueError("valid_radius cannot exceed the stored radius")

    @property
    def d(self) -> int:
        return len(self.center)

    def index_of(self, x: Offset) -> tuple[int, ...]:
        return tuple(x[i] - self.center[i] + self.radius for i in range(self.d))

    def height_at(self, x: Offset) -> float:
        if max(abs(x[i] - self.center[i]) for i in range(self.d)) > self.valid_radius:
            raise ValueError(f"site {x} lies outside the valid radius {self.valid_radius}")
        return float(self.heights[self.index_of(x)])

    def stencil_heights(self, x: Offset, hood: Neighborhood) -> np.ndarray:
        """Heights of x's full stencil in canonical order."""
        return np.array(
            [self.height_at(tuple(x[i] + off[i] for i in range(self.d)))
             for off in hood.offsets_full]
        )


def flat_window(d: int, radius: int, center: Optional[Offset] = None) -> FieldWindow:
    center = tuple(0 for _ in range(d)) if center is None else tuple(center)
    heights = np.zeros((2 * radius + 1,) * d)
    return FieldWindow(t=0, center=center, radius=radius, valid_radius=radius, heights=heights)


@dataclass(frozen=True)
class SimulationPlan:
    """One growth experiment: model, horizon, probes and noise identity.

    The initial condition is flat zero.  The window radius is
    t_max + max sup-norm of the probes (+ extra_radius, used only by the
    cone-exactness test), so every probe is exact at t_max.
    """

    model: Model
    t_max: int
    seed: int
    replica: int = 0
    probes: tuple[Offset, ...] = ((0,),)
    pairs: tuple[tuple[int, int], ...] = ()
    center: Optional[Offset] = None
    retain_trajectory: bool = False
    extra_radius: int = 0

    def __post_init__(self) -> None:
        if self.t_max < 0:
            raise ValueError(f"t_max must be >= 0, got {self.t_max}")
        if not self.probes:
            raise ValueError("at least one probe offset is required")
        d = self.model.d
        probes = tuple(tuple(int(c) for c in p) for p in self.probes)
        if any(len(p) != d for p in probes):
            raise ValueError(f"probe offsets must have length {d}")
        object.__setattr__(self, "probes", probes)
        center = tuple(0 for _ in range(d)) if self.center is None else tuple(self.center)
        if len(center) != d:
            raise ValueError(f"center must have length {d}")
        object.__setattr__(self, "center", center)
        for i, j in self.pairs:
            if not (0 <= i < len(probes) and 0 <= j < len(probes)):
                raise ValueError(f"pair ({i}, {j}) references a missing probe")

    @property
    def d(self) -> int:
        return self.model.d

    @property
    def radius(self) -> int:
        reach = max(max(abs(c) for c in p) for p in self.probes)
        return self.t_max + reach + self.extra_radius

    def noise_field(self, replica: Optional[int] = None) -> NoiseField:
        return NoiseField(seed=self.seed, replica=self.replica if replica is None else replica)


@dataclass(frozen=True)
class Trajectory:
    """Retained sequence of windows t = 0..t_max plus the noise identity.

    Consumed by the backward-walk derivative machinery, which needs the
    realized field at every intermediate time.
    """

    plan: SimulationPlan
    noise: NoiseField
    windows: tuple[FieldWindow, ...]

    def window(self, s: int) -> FieldWindow:
        return self.windows[s]

    def height(self, s: int, x: Offset) -> float:
        return self.windows[s].height_at(x)


@dataclass(frozen=True)
class SimulationResult:
    plan: SimulationPlan
    probe_values: np.ndarray
    probe_series: np.ndarray  # shape (t_max + 1, n_probes)
    final_window: FieldWindow
    trajectory: Optional[Trajectory]

    def probe(self, offset: Offset) -> float:
        return float(self.probe_values[self.plan.probes.index(tuple(offset))])


@dataclass
class EnsembleResult:
    plan: SimulationPlan
    n_replicas: int
    probe_stats: dict[Offset, EnsembleStats] = field(default_factory=dict)
    pair_stats: dict[tuple[Offset, Offset], EnsembleStats] = field(default_factory=dict)


# -- stepping internals -------------------------------------------------------


def _aux_rows(model: Model, z: np.ndarray) -> np.ndarray:
    """Transformed noise consumed by the step kernels."""
    if model.kind in ("ballistic", "rsos", "rsos_alternating"):
        return ndtr(z)
    return model.transform(z)


_KERNEL_KINDS = {"random_deposition", "ballistic", "lpp", "polymer", "rsos", "rsos_alternating"}


def _parity_mask(corner: Offset, shape: tuple[int, ...], t: int) -> np.ndarray:
    """True at sites whose coordinate-sum parity matches the parity of t."""
    d = len(shape)
    total = np.zeros(shape, dtype=np.int64)
    for axis in range(d):
        coords = corner[axis] + np.arange(shape[axis], dtype=np.int64)
        bshape = [1] * d
        bshape[axis] = shape[axis]
        total = total + coords.reshape(bshape)
    return (total - t) % 2 == 0


def _axis_gap_max(region: np.ndarray, d: int, stride: int, axis: int) -> float:
    sl_hi = [slice(None)] * region.ndim
    sl_lo = [slice(None)] * region.ndim
    ax = region.ndim - d + axis
    sl_hi[ax] = slice(stride, None)
    sl_lo[ax] = slice(None, -stride)
    a = region[tuple(sl_hi)]
    if a.size == 0:
        return 0.0
    return float(np.abs(a - region[tuple(sl_lo)]).max())


def _diag_gap_max(region: np.ndarray, d: int, axis_i: int, axis_j: int, sign: int) -> float:
    sl_hi = [slice(None)] * region.ndim
    sl_lo = [slice(None)] * region.ndim
    ai = region.ndim - d + axis_i
    aj = region.ndim - d + axis_j
    sl_hi[ai] = slice(1, None)
    sl_lo[ai] = slice(None, -1)
    if sign > 0:
        sl_hi[aj] = slice(1, None)
        sl_lo[aj] = slice(None, -1)
    else:
        sl_hi[aj] = slice(None, -1)
        sl_lo[aj] = slice(1, None)
    a = region[tuple(sl_hi)]
    if a.size == 0:
        return 0.0
    return float(np.abs(a - region[tuple(sl_lo)]).max())


def _assert_constraints(model: Model, region: np.ndarray, t: int) -> None:
    """Hard zero-tolerance checks on every realized configuration."""
    d = model.d
    if model.kind == "rsos_alternating":
        for axis in range(d):
            worst = _axis_gap_max(region, d, 1, axis)
            if worst > 1.0:
                raise ConstraintViolationError(
                    f"neighbor gap {worst} > 1 at t={t} (alternating rule)"
                )
    elif model.kind == "rsos":
        for axis in range(d):
            worst = _axis_gap_max(region, d, 2, axis)
            if worst > 2.0:
                raise ConstraintViolationError(
                    f"two-step gap {worst} > 2 at t={t} (simultaneous rule)"
                )
        for i in range(d):
            for j in range(i + 1, d):
                for sign in (1, -1):
                    worst = _diag_gap_max(region, d, i, j, sign)
                    if worst > 2.0:
                        raise ConstraintViolationError(
                            f"two-step gap {worst} > 2 at t={t} (simultaneous rule)"
                        )


def _generic_step(model: DrivingFunction, h_in: np.ndarray, z: np.ndarray,
                  out: np.ndarray, d: int) -> None:
    """Fallback step for driving functions without a specialized kernel."""
    from ._kernels.numpy_backend import _shift_view

    hood = model.hood
    cols = [_shift_view(h_in, off).reshape(-1) for off in hood.offsets_full]
    U = np.stack(cols, axis=1)
    res = model.evaluate_many(U, np.broadcast_to(z, out.shape).reshape(-1))
    out[...] = res.reshape(out.shape)


def _evolve(
    model: Model,
    *,
    t_max: int,
    corner: Offset,
    width: int,
    noise: Optional[NoiseField] = None,
    replicas: Optional[np.ndarray] = None,
    base: Optional[NoiseField] = None,
    collect: Optional[Callable[[int, Offset, np.ndarray], None]] = None,
) -> np.ndarray:
    """Evolve a flat-zero box from t=0 to t_max.

    Single-window mode passes `noise`; batch mode passes `replicas` plus the
    clean `base` field.  `collect` sees (time, valid-corner, region-view)
    after every step including t=0; views alias the ping-pong buffers, so
    collectors must copy what they keep.
    """
    d = model.d
    batched = replicas is not None
    lead = (len(replicas),) if batched else ()
    if width < 2 * t_max + 1:
        raise ValueError("window too narrow for the requested horizon")
    cur = np.zeros(lead + (width,) * d)
    nxt = np.empty_like(cur)
    if collect is not None:
        collect(0, corner, cur)
    kind = getattr(model, "kind", "custom")
    for s in range(t_max):
        t_new = s + 1
        in_sl = (slice(s, width - s),) * d
        out_sl = (slice(s + 1, width - s - 1),) * d
        h_in = cur[(Ellipsis,) + in_sl]
        out = nxt[(Ellipsis,) + out_sl]
        out_shape = tuple(width - 2 * t_new for _ in range(d))
        out_corner = tuple(corner[i] + t_new for i in range(d))
        if batched:
            z = base.gaussian_block_batch(t_new, out_corner, out_shape, replicas)
        else:
            z = noise.gaussian_block(t_new, out_corner, out_shape)
        if kind in _KERNEL_KINDS:
            aux = _aux_rows(model, z)
            upd = None
            if kind == "rsos_alternating":
                upd = _parity_mask(out_corner, out_shape, s)
            beta = getattr(model, "beta", None)
            _kernels.step(kind, h_in, aux, out, d=d, beta=beta, upd=upd)
        else:
            _generic_step(model, h_in, z, out, d)
        _assert_constraints(model, out, t_new)
        if collect is not None:
            collect(t_new, out_corner, out)
        cur, nxt = nxt, cur
    final_sl = (slice(t_max, width - t_max),) * d
    return cur[(Ellipsis,) + final_sl]


# -- public operations --------------------------------------------------------


def evolve_step(window: FieldWindow, phi: Model, noise: NoiseField) -> FieldWindow:
    """One update of a window: time advances by 1, validity shrinks by 1.

    Every site of the new valid region is the model update of its stencil
    and the noise at (t+1, site).
    """
    if window.valid_radius < 1:
        raise ValueError("cannot step a window with valid_radius < 1")
    if phi.d != window.d:
        raise ValueError("model dimension does not match the window")
    d = window.d
    r = window.valid_radius
    lo = window.index_of(tuple(c - r for c in window.center))
    h_in = window.heights[tuple(slice(lo[i], lo[i] + 2 * r + 1) for i in range(d))]
    t_new = window.t + 1
    out_shape = (2 * r - 1,) * d
    out_corner = tuple(window.center[i] - (r - 1) for i in range(d))
    out = np.empty(out_shape)
    z = noise.gaussian_block(t_new, out_corner, out_shape)
    kind = getattr(phi, "kind", "custom")
    if kind in _KERNEL_KINDS:
        upd = _parity_mask(out_corner, out_shape, window.t) if kind == "rsos_alternating" else None
        _kernels.step(kind, h_in, _aux_rows(phi, z), out, d=d,
                      beta=getattr(phi, "beta", None), upd=upd)
    else:
        _generic_step(phi, h_in, z, out, d)
    _assert_constraints(phi, out, t_new)
    return FieldWindow(t=t_new, center=window.center, radius=r - 1,
                       valid_radius=r - 1, heights=out)


def simulate(plan: SimulationPlan, noise: Optional[NoiseField] = None) -> SimulationResult:
    """Run one replica; probe heights are exact infinite-lattice values."""
    d = plan.d
    model = plan.model
    noise = plan.noise_field() if noise is None else noise
    radius = plan.radius
    width = 2 * radius + 1
    corner = tuple(plan.center[i] - radius for i in range(d))
    probe_pos = [tuple(plan.center[i] + p[i] for i in range(d)) for p in plan.probes]

    series = np.empty((plan.t_max + 1, len(probe_pos)))
    windows: list[FieldWindow] = []

    def collect(t: int, vcorner: Offset, region: np.ndarray) -> None:
        for k, pos in enumerate(probe_pos):
            idx = tuple(pos[i] - vcorner[i] for i in range(d))
            series[t, k] = region[idx]
        if plan.retain_trajectory:
            vr = (region.shape[0] - 1) // 2
            windows.append(FieldWindow(
                t=t, center=plan.center, radius=vr, valid_radius=vr,
                heights=np.array(region),
            ))

    final_region = _evolve(model, t_max=plan.t_max, corner=corner, width=width,
                           noise=noise, collect=collect)
    vr = radius - plan.t_max
    final_window = FieldWindow(t=plan.t_max, center=plan.center, radius=vr,
                               valid_radius=vr, heights=np.array(final_region))
    trajectory = Trajectory(plan=plan, noise=noise, windows=tuple(windows)) \
        if plan.retain_trajectory else None
    return SimulationResult(plan=plan, probe_values=series[-1].copy(),
                            probe_series=series, final_window=final_window,
                            trajectory=trajectory)


def simulate_rsos_alternating(plan: SimulationPlan,
                              noise: Optional[NoiseField] = None) -> SimulationResult:
    """Parity-alternating constrained growth; neighbor gaps are asserted <= 1
    after every step (zero tolerance)."""
    if plan.model.kind != "rsos_alternating":
        raise ValueError("plan.model must be the alternating rule")
    return simulate(plan, noise=noise)


def simulate_rsos_simultaneous(plan: SimulationPlan,
                               noise: Optional[NoiseField] = None) -> SimulationResult:
    """Constrained growth with every site updated each step; two-step gaps
    are asserted <= 2 after every step (zero tolerance)."""
    if getattr(plan.model, "kind", None) != "rsos":
        raise ValueError("plan.model must be the simultaneous constrained rule")
    return simulate(plan, noise=noise)


def run_ensemble(plan: SimulationPlan, n_replicas: int, parallelism: int = 1) -> EnsembleResult:
    """Independent replicas r = 0..n-1, replica r driven by NoiseField(seed, r).

    Replicas run in fixed-size chunks; chunk statistics are folded in
    ascending replica order whatever the worker count, so results are
    independent of scheduling.
    """
    if n_replicas < 2:
        raise ValueError("n_replicas must be >= 2")
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    if plan.retain_trajectory:
        raise ValueError("trajectory retention is a single-run feature; "
                         "ensembles keep only probe values")
    d = plan.d
    radius = plan.radius
    width = 2 * radius + 1
    corner = tuple(plan.center[i] - radius for i in range(d))
    base = NoiseField(seed=plan.seed)
    probe_pos = [tuple(plan.center[i] + p[i] for i in range(d)) for p in plan.probes]

    def run_chunk(r0: int, r1: int) -> np.ndarray:
        replicas = np.arange(r0, r1, dtype=np.uint64)
        region = _evolve(plan.model, t_max=plan.t_max, corner=corner, width=width,
                         replicas=replicas, base=base)
        vcorner = tuple(corner[i] + plan.t_max for i in range(d))
        cols = np.empty((r1 - r0, len(probe_pos)))
        for k, pos in enumerate(probe_pos):
            idx = tuple(pos[i] - vcorner[i] for i in range(d))
            cols[:, k] = region[(slice(None),) + idx]
        return cols

    bounds = [(r0, min(r0 + CHUNK_REPLICAS, n_replicas))
              for r0 in range(0, n_replicas, CHUNK_REPLICAS)]

    result = EnsembleResult(plan=plan, n_replicas=n_replicas)
    for p in plan.probes:
        result.probe_stats[p] = EnsembleStats()
    for i, j in plan.pairs:
        result.pair_stats[(plan.probes[i], plan.probes[j])] = EnsembleStats()

    def fold(cols: np.ndarray) -> None:
        for k, p in enumerate(plan.probes):
            result.probe_stats[p].add_batch(cols[:, k])
        for i, j in plan.pairs:
            key = (plan.probes[i], plan.probes[j])
            result.pair_stats[key].add_batch(cols[:, i] - cols[:, j])

    if parallelism == 1:
        for r0, r1 in bounds:
            fold(run_chunk(r0, r1))
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = [pool.submit(run_chunk, r0, r1) for r0, r1 in bounds]
            for fut in futures:  # submission order == ascending replica order
                fold(fut.result())
    return result
