"""Vectorized step kernels, any dimension.

Each kernel maps the valid region of a height array (margin 1 on every
spatial axis) to the next-time core region.  `aux` holds the transformed
noise (F(z) or CDF(z)) for the output sites.  Accumulation orders are fixed
and mirrored by the compiled kernels: for the pure max/interval rules the
two backends agree bit-for-bit, for the smoothed-maximum rule they agree up
to last-ulp differences in exp/log.
"""

from __future__ import annotations

import numpy as np

from ..lattice import Offset, neighborhood


def _core_view(h: np.ndarray, d: int) -> np.ndarray:
    return h[(Ellipsis,) + (slice(1, -1),) * d]


def _shift_view(h: np.ndarray, offset: Offset) -> np.ndarray:
    sl: list = [Ellipsis]
    for o in offset:
        if o == 1:
            sl.append(slice(2, None))
        elif o == -1:
            sl.append(slice(None, -2))
        else:
            sl.append(slice(1, -1))
    return h[tuple(sl)]


def step_random_deposition(h, aux, out, d):
    np.add(_core_view(h, d), aux, out=out)


def step_ballistic(h, aux, out, d):
    hood = neighborhood(d)
    acc = _core_view(h, d) + aux
    for off in hood.offsets_ring:
        np.maximum(acc, _shift_view(h, off), out=acc)
    out[...] = acc


def step_lpp(h, aux, out, d):
    hood = neighborhood(d)
    acc = _shift_view(h, hood.offsets_pos[0]).copy()
    for off in hood.offsets_pos[1:]:
        np.maximum(acc, _shift_view(h, off), out=acc)
    np.add(acc, aux, out=out)


def step_polymer(h, aux, out, d, beta):
    hood = neighborhood(d)
    views = [_shift_view(h, off) for off in hood.offsets_ring]
    big = views[0].copy()
    for v in views[1:]:
        np.maximum(big, v, out=big)
    s = np.exp(beta * (views[0] - big))
    for v in views[1:]:
        s += np.exp(beta * (v - big))
    out[...] = big + np.log(s) / beta + aux


def _rsos_interval_update(h, aux, d):
    hood = neighborhood(d)
    views = [_shift_view(h, off) for off in hood.offsets_ring]
    big = views[0].copy()
    small = views[0].copy()
    for v in views[1:]:
        np.maximum(big, v, out=big)
        np.minimum(small, v, out=small)
    lo = big - 1.0
    hi = small + 1.0
    v = aux * lo + (1.0 - aux) * hi
    np.maximum(v, lo, out=v)
    np.minimum(v, hi, out=v)
    return v


def step_rsos(h, aux, out, d):
    out[...] = _rsos_interval_update(h, aux, d)


def step_rsos_alternating(h, aux, out, d, upd):
    v = _rsos_interval_update(h, aux, d)
    np.copyto(out, _core_view(h, d))
    np.copyto(out, v, where=upd)
