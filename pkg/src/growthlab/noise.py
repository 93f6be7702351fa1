"""Deterministic, order-independent Gaussian noise indexed by space-time sites.

Every variate is a pure function of (seed, replica, t, x): a 64-bit mixing
permutation is applied to the packed index tuple, yielding two uniform words
that feed one Box-Muller transform (the second Gaussian is discarded so each
site consumes exactly one counter).  Query order, window geometry and batch
shape therefore never change a value, which is what makes perturbed re-runs
(finite differences) and parallel replicas exactly reproducible.

Coordinates are bounded (|x_i| < 2**31, 1 <= t < 2**32); violating the bounds
is an error rather than silent wraparound, since an index collision would
corrupt the independence of the field.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .lattice import Offset, SiteCoord

_COORD_BOUND = 2**31
_TIME_BOUND = 2**32

# splitmix64 finalizer constants
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)

# distinct tweaks for the two output words
_W1 = np.uint64(0xD6E8FEB86659FD93)
_W2 = np.uint64(0xA5CB3F89C24B6AF1)

_INV_2_53 = 2.0**-53


def _mix64(x: np.ndarray) -> np.ndarray:
    """Strong 64-bit mixing permutation (splitmix64 finalizer).

    Multiplications wrap mod 2**64 by design.
    """
    with np.errstate(over="ignore"):
        x = x ^ (x >> _S30)
        x = x * _M1
        x = x ^ (x >> _S27)
        x = x * _M2
        x = x ^ (x >> _S31)
    return x


def _gaussian_from_state(h: np.ndarray) -> np.ndarray:
    """Two uniform words from the mixed state -> one standard Gaussian."""
    w1 = _mix64(h ^ _W1)
    w2 = _mix64(h ^ _W2)
    # ((w >> 11) + 0.5) * 2**-53 lies strictly inside (0, 1)
    u1 = ((w1 >> _S11).astype(np.float64) + 0.5) * _INV_2_53
    u2 = ((w2 >> _S11).astype(np.float64) + 0.5) * _INV_2_53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def _check_time(t: int) -> None:
    if not 1 <= t < _TIME_BOUND:
        raise ValueError(f"noise time index must satisfy 1 <= t < 2**32, got {t}")


def _check_coords(coords: Iterable[int]) -> None:
    for c in coords:
        if not -_COORD_BOUND < c < _COORD_BOUND:
            raise ValueError(f"lattice coordinate {c} outside |x| < 2**31")


@dataclass(frozen=True)
class NoiseField:
    """Immutable seeded Gaussian field with optional point perturbations.

    `overlays` maps a site to an additive shift of the base variate; it is a
    sparse structure because experiments perturb at most a couple of sites.
    Overlay application returns a new field, so instances can be shared
    across concurrent workers.
    """

    seed: int
    replica: int = 0
    overlays: Mapping[tuple[int, Offset], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.replica < 0:
            raise ValueError(f"replica index must be >= 0, got {self.replica}")

    def _state_after_time(self, t: int) -> np.ndarray:
        h = _mix64(np.uint64(self.seed & 0xFFFFFFFFFFFFFFFF))
        h = _mix64(h ^ np.uint64(self.replica))
        return _mix64(h ^ np.uint64(t))

    def gaussian_at(self, site: SiteCoord) -> float:
        """The standard-Gaussian variate at one site, plus any overlay.

        Routed through gaussian_block so single-site queries and block
        generation share one code path and agree bit-for-bit.
        """
        d = len(site.x)
        block = self.gaussian_block(site.t, site.x, (1,) * d)
        return float(block.reshape(-1)[0])

    def with_overlay(self, site: SiteCoord, delta: float) -> "NoiseField":
        """New field whose value at `site` is shifted by delta (additively
        stacked on any existing overlay there)."""
        _check_time(site.t)
        _check_coords(site.x)
        key = (site.t, site.x)
        merged = dict(self.overlays)
        merged[key] = merged.get(key, 0.0) + delta
        return NoiseField(seed=self.seed, replica=self.replica, overlays=merged)

    def gaussian_block(self, t: int, corner: Offset, shape: tuple[int, ...]) -> np.ndarray:
        """Gaussians for the box of sites corner + index, all at time t.

        Bit-identical to calling gaussian_at per site; overlays inside the
        box are applied.
        """
        _check_time(t)
        d = len(shape)
        if len(corner) != d:
            raise ValueError("corner and shape dimension mismatch")
        _check_coords(corner)
        _check_coords(tuple(corner[i] + shape[i] - 1 for i in range(d)))
        h = self._state_after_time(t)
        for axis in range(d):
            coords = corner[axis] + np.arange(shape[axis], dtype=np.int64)
            packed = (coords + _COORD_BOUND).astype(np.uint64)
            bshape = [1] * d
            bshape[axis] = shape[axis]
            h = _mix64(h ^ packed.reshape(bshape))
        h = np.broadcast_to(h, shape).copy() if h.shape != tuple(shape) else h
        out = _gaussian_from_state(h)
        if self.overlays:
            for (ot, ox), delta in self.overlays.items():
                if ot != t:
                    continue
                idx = tuple(ox[i] - corner[i] for i in range(d))
                if all(0 <= idx[i] < shape[i] for i in range(d)):
                    out[idx] += delta
        return out

    def gaussian_block_batch(
        self, t: int, corner: Offset, shape: tuple[int, ...], replicas: np.ndarray
    ) -> np.ndarray:
        """Gaussians for a box of sites at time t across many replicas.

        Returns shape (len(replicas), *shape).  Only clean fields may be
        batched: overlays are tied to one replica.
        """
        if self.overlays:
            raise ValueError("cannot batch a field that carries overlays")
        _check_time(t)
        d = len(shape)
        _check_coords(corner)
        _check_coords(tuple(corner[i] + shape[i] - 1 for i in range(d)))
        h0 = _mix64(np.uint64(self.seed & 0xFFFFFFFFFFFFFFFF))
        h = _mix64(h0 ^ replicas.astype(np.uint64).reshape((-1,) + (1,) * d))
        h = _mix64(h ^ np.uint64(t))
        for axis in range(d):
            coords = corner[axis] + np.arange(shape[axis], dtype=np.int64)
            packed = (coords + _COORD_BOUND).astype(np.uint64)
            bshape = [1] * (d + 1)
            bshape[axis + 1] = shape[axis]
            h = _mix64(h ^ packed.reshape(bshape))
        full = (len(replicas),) + tuple(shape)
        if h.shape != full:
            h = np.broadcast_to(h, full).copy()
        return _gaussian_from_state(h)
