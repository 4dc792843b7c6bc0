"""Vector kernels: Euclidean distance and point-to-segment distance.

All arithmetic runs in 64-bit floats regardless of how features are stored on
disk; 4096-dimensional inner products drift too far at 32 bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

__all__ = ["SegmentDistanceResult", "euclidean_distance", "segment_distance"]

Vector = np.ndarray


@dataclass(frozen=True)
class SegmentDistanceResult:
    """Outcome of measuring a query point against one edge segment.

    Attributes:
        distance: shortest distance from the query to the segment.
        on_segment: True when the perpendicular foot lands between the
            endpoints, so the distance is to the projection itself.
        t: projection coefficient along the edge, 0 at the first endpoint and
            1 at the second. NaN when the edge is degenerate.
        degenerate: True when the two endpoints coincide and the result
            degrades to a plain point-to-point distance.
    """

    distance: float
    on_segment: bool
    t: float
    degenerate: bool = False


def _as_vector(v) -> Vector:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ConfigurationError(f"expected a 1-D vector, got shape {arr.shape}")
    return arr


def _check_same_dim(*vectors: Vector) -> None:
    dims = {v.shape[0] for v in vectors}
    if len(dims) > 1:
        raise ConfigurationError(f"dimension mismatch: {sorted(dims)}")


def euclidean_distance(a, b) -> float:
    """L2 distance between two vectors of equal dimension."""
    a = _as_vector(a)
    b = _as_vector(b)
    _check_same_dim(a, b)
    d = a - b
    return float(np.sqrt(np.dot(d, d)))


def _endpoints_out_of_order(xi: Vector, xj: Vector) -> bool:
    # Lexicographic compare on components; False when the vectors are equal.
    unequal = xi != xj
    if not unequal.any():
        return False
    k = int(np.argmax(unequal))
    return bool(xi[k] > xj[k])


def segment_distance(x, xi, xj) -> SegmentDistanceResult:
    """Distance from point x to the closed segment [xi, xj].

    The projection coefficient t places the perpendicular foot along the
    edge. For 0 <= t <= 1 the foot lies on the segment and the distance is
    measured to it; otherwise the nearer endpoint wins. Coincident endpoints
    degrade to the point distance with the degenerate flag set.

    Endpoint order does not matter: the edge is canonicalized internally, so
    swapping xi and xj yields a bit-identical distance and t mapped to 1 - t.
    """
    x = _as_vector(x)
    xi = _as_vector(xi)
    xj = _as_vector(xj)
    _check_same_dim(x, xi, xj)

    swapped = _endpoints_out_of_order(xi, xj)
    if swapped:
        xi, xj = xj, xi

    edge = xj - xi
    denom = float(np.dot(edge, edge))
    if denom == 0.0:
        return SegmentDistanceResult(
            distance=euclidean_distance(x, xi),
            on_segment=False,
            t=math.nan,
            degenerate=True,
        )

    t = float(np.dot(edge, x - xi)) / denom
    if 0.0 <= t <= 1.0:
        on_segment = True
        # Exact boundaries resolve to endpoint distances so that identity
        # queries return exactly zero.
        if t == 0.0:
            distance = euclidean_distance(x, xi)
        elif t == 1.0:
            distance = euclidean_distance(x, xj)
        else:
            distance = euclidean_distance(x, xi + t * edge)
    else:
        on_segment = False
        distance = min(euclidean_distance(x, xi), euclidean_distance(x, xj))

    if swapped:
        reported = 1.0 - t
        if not on_segment and 0.0 <= reported <= 1.0:
            # When t sits a few ulps outside [0, 1], the 1 - t map can round
            # back onto the boundary; push the report off-segment so that
            # on_segment <=> 0 <= t <= 1 stays true.
            reported = math.nextafter(
                reported, math.inf if t < 0.0 else -math.inf
            )
        t = reported
    return SegmentDistanceResult(distance=distance, on_segment=on_segment, t=t)
