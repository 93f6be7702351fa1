"""Lattice geometry: site coordinates and the canonical update neighborhoods.

The update stencil of every model is the origin plus its 2d nearest
neighbors.  All height vectors passed to driving functions are laid out in
the canonical order fixed here: origin first, then +e1, -e1, ..., +ed, -ed.
Derivative vectors over the stencil use the same layout.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

Offset = tuple[int, ...]


@dataclass(frozen=True)
class SiteCoord:
    """A space-time lattice site (t, x) with t >= 1.

    Noise variables are indexed from time 1 onward; time 0 carries only the
    initial condition.
    """

    t: int
    x: Offset

    def __post_init__(self) -> None:
        if self.t < 1:
            raise ValueError(f"site time must be >= 1, got {self.t}")
        object.__setattr__(self, "x", tuple(int(c) for c in self.x))


@dataclass(frozen=True)
class Neighborhood:
    """The canonical stencil offsets for dimension d.

    offsets_full:  origin + 2d nearest neighbors (size 2d+1), canonical order
    offsets_ring:  the 2d nonzero offsets (canonical order, origin dropped)
    offsets_pos:   the d positive-axis offsets e1..ed
    """

    d: int
    offsets_full: tuple[Offset, ...]
    offsets_ring: tuple[Offset, ...]
    offsets_pos: tuple[Offset, ...]

    @property
    def size(self) -> int:
        return 2 * self.d + 1

    def index_of(self, offset: Offset) -> int:
        """Position of an offset in the canonical full ordering."""
        return self.offsets_full.index(tuple(offset))

    @property
    def pos_indices(self) -> tuple[int, ...]:
        """Indices of e1..ed within the full ordering (1, 3, 5, ...)."""
        return tuple(1 + 2 * i for i in range(self.d))


@lru_cache(maxsize=None)
def neighborhood(d: int) -> Neighborhood:
    """Build the canonical neighborhood for dimension d >= 1."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    offsets: list[Offset] = [tuple(0 for _ in range(d))]
    for axis in range(d):
        plus = tuple(1 if i == axis else 0 for i in range(d))
        minus = tuple(-1 if i == axis else 0 for i in range(d))
        offsets.append(plus)
        offsets.append(minus)
    full = tuple(offsets)
    ring = full[1:]
    pos = tuple(full[1 + 2 * i] for i in range(d))
    return Neighborhood(d=d, offsets_full=full, offsets_ring=ring, offsets_pos=pos)
