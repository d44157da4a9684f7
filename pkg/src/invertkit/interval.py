"""Closed intervals, axis-aligned boxes and pavings.

Intervals and boxes are immutable tuple subclasses so they can be unpacked
and hashed cheaply inside the paver's inner loop.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

INF = math.inf


def down(x: float) -> float:
    return math.nextafter(x, -INF)


def up(x: float) -> float:
    return math.nextafter(x, INF)


class Interval(tuple):
    """A closed interval ``[lo, hi]`` with finite bounds."""

    __slots__ = ()

    def __new__(cls, lo: float, hi: float | None = None) -> "Interval":
        lo = float(lo)
        hi = lo if hi is None else float(hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError(f"interval bounds must be finite, got [{lo}, {hi}]")
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        return tuple.__new__(cls, (lo, hi))

    def __getnewargs__(self):
        return (self[0], self[1])

    @property
    def lo(self) -> float:
        return self[0]

    @property
    def hi(self) -> float:
        return self[1]

    @property
    def width(self) -> float:
        return self[1] - self[0]

    @property
    def mid(self) -> float:
        return (self[0] + self[1]) / 2

    def contains(self, x: float) -> bool:
        return self[0] <= x <= self[1]

    def issubset(self, other: "Interval") -> bool:
        return other[0] <= self[0] and self[1] <= other[1]

    def __repr__(self) -> str:
        return f"Interval({self[0]!r}, {self[1]!r})"


class Box(tuple):
    """Axis-aligned product of intervals, dimension >= 1."""

    __slots__ = ()

    def __new__(cls, intervals: Iterable) -> "Box":
        ivs = tuple(iv if type(iv) is Interval else Interval(*iv) for iv in intervals)
        if not ivs:
            raise ValueError("a box needs at least one axis")
        return tuple.__new__(cls, ivs)

    def __getnewargs__(self):
        return (tuple(self),)

    @classmethod
    def cube(cls, lo: float, hi: float, dim: int) -> "Box":
        return cls([Interval(lo, hi)] * dim)

    @property
    def dim(self) -> int:
        return len(self)

    @property
    def volume(self) -> float:
        return volume(self)

    def contains_point(self, point: Sequence[float]) -> bool:
        return all(iv[0] <= x <= iv[1] for iv, x in zip(self, point))

    def issubset(self, other: "Box") -> bool:
        return all(a.issubset(b) for a, b in zip(self, other))

    def to_list(self) -> list[list[float]]:
        return [[iv[0], iv[1]] for iv in self]

    def __repr__(self) -> str:
        return "Box(" + " x ".join(f"[{lo!r}, {hi!r}]" for lo, hi in self) + ")"


def _check_dims(a, b) -> None:
    if isinstance(a, Box) != isinstance(b, Box) or (isinstance(a, Box) and len(a) != len(b)):
        raise ValueError("dimension mismatch")


def intersect(a, b):
    """Component-wise intersection; ``None`` when empty."""
    _check_dims(a, b)
    if isinstance(a, Box):
        out = []
        for (alo, ahi), (blo, bhi) in zip(a, b):
            lo, hi = max(alo, blo), min(ahi, bhi)
            if lo > hi:
                return None
            out.append(Interval(lo, hi))
        return Box(out)
    lo, hi = max(a[0], b[0]), min(a[1], b[1])
    if lo > hi:
        return None
    return Interval(lo, hi)


def volume(b) -> float:
    """Lebesgue measure of a box (or length of an interval); 0 for empty."""
    if b is None:
        return 0.0
    if isinstance(b, Interval):
        return b.width
    v = 1.0
    for lo, hi in b:
        v *= hi - lo
    return v


def bisect_all(b: Box) -> list[Box]:
    """Split every axis at its midpoint.

    Children come in binary-counting order with axis 0 as the most
    significant digit.  An axis whose midpoint rounds onto one of its
    bounds is left whole, so fewer than ``2**d`` children may be returned.
    """
    if volume(b) <= 0.0:
        raise ValueError(f"cannot bisect zero-volume box {b!r}")
    pieces = []
    for lo, hi in b:
        m = (lo + hi) / 2
        if lo < m < hi:
            pieces.append((Interval(lo, m), Interval(m, hi)))
        else:
            pieces.append((Interval(lo, hi),))
    if all(len(p) == 1 for p in pieces):
        raise ValueError(f"box too thin to bisect: {b!r}")
    return [tuple.__new__(Box, combo) for combo in itertools.product(*pieces)]


ACCEPTED, REJECTED, BOUNDARY = 1, 2, 4
CLASS_NAMES = {"accepted": ACCEPTED, "rejected": REJECTED, "boundary": BOUNDARY}


@dataclass
class Paving:
    """Partition of the adjustment box into accepted, rejected and boundary boxes."""

    R: Box
    P: Box
    resolution: float
    model: str = ""
    accepted: list[Box] = field(default_factory=list)
    rejected: list[Box] = field(default_factory=list)
    boundary: list[Box] = field(default_factory=list)

    def __iter__(self):
        for name in CLASS_NAMES:
            for b in getattr(self, name):
                yield name, b

    def volumes(self) -> dict[str, float]:
        return {name: math.fsum(volume(b) for b in getattr(self, name)) for name in CLASS_NAMES}

    def tiles_R(self, rel_tol: float = 1e-9) -> bool:
        total = math.fsum(self.volumes().values())
        return math.isclose(total, volume(self.R), rel_tol=rel_tol)

    def extend(self, other: "Paving") -> None:
        self.accepted.extend(other.accepted)
        self.rejected.extend(other.rejected)
        self.boundary.extend(other.boundary)

    def membership(self, points) -> np.ndarray:
        """Bitmask per point of the classes whose closed boxes contain it.

        A point on a face shared by boxes of different classes gets every
        such class; a point outside ``R`` gets 0.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.R.dim:
            raise ValueError("probe dimension does not match the paving")
        order = np.argsort(pts[:, 0], kind="stable")
        xs = pts[order, 0]
        codes = np.zeros(len(pts), dtype=np.int8)
        for name, code in CLASS_NAMES.items():
            for b in getattr(self, name):
                i0 = np.searchsorted(xs, b[0][0], side="left")
                i1 = np.searchsorted(xs, b[0][1], side="right")
                if i0 == i1:
                    continue
                idx = order[i0:i1]
                sub = pts[idx]
                inside = np.ones(len(idx), dtype=bool)
                for k in range(1, self.R.dim):
                    lo, hi = b[k]
                    inside &= (sub[:, k] >= lo) & (sub[:, k] <= hi)
                codes[idx[inside]] |= code
        return codes

    # serialization

    def to_dict(self) -> dict:
        return {
            "resolution": self.resolution,
            "model": self.model,
            "R": self.R.to_list(),
            "P": self.P.to_list(),
            "accepted": [b.to_list() for b in self.accepted],
            "rejected": [b.to_list() for b in self.rejected],
            "boundary": [b.to_list() for b in self.boundary],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":")) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Paving":
        return cls(
            R=Box(d["R"]),
            P=Box(d["P"]),
            resolution=float(d["resolution"]),
            model=d.get("model", ""),
            accepted=[Box(b) for b in d["accepted"]],
            rejected=[Box(b) for b in d["rejected"]],
            boundary=[Box(b) for b in d["boundary"]],
        )

    @classmethod
    def from_json(cls, text: str) -> "Paving":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([c for k in range(self.R.dim) for c in (f"lo{k}", f"hi{k}")] + ["class"])
        for name, b in self:
            w.writerow([repr(v) for iv in b for v in iv] + [name])
        return buf.getvalue()

    @classmethod
    def boxes_from_csv(cls, text: str) -> dict[str, list[Box]]:
        rows = list(csv.reader(io.StringIO(text)))
        out: dict[str, list[Box]] = {name: [] for name in CLASS_NAMES}
        for row in rows[1:]:
            vals = [float(v) for v in row[:-1]]
            out[row[-1]].append(Box(zip(vals[0::2], vals[1::2])))
        return out
