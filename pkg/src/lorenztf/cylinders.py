"""Cylinder partitions P^(n) of a Lorenz-like map.

Cylinders are built by endpoint pullback.  A depth-n cylinder with word
``s + w`` is ``g_s(C_w ∩ image(s))`` where ``C_w`` is the depth-(n-1) cylinder
with word ``w``, so a whole level is obtained from the previous one with two
vectorized inverse-branch applications.  Within a level the arrays are sorted
by left endpoint, which for increasing branches coincides with lexicographic
word order (L < R).  Word codes store the first symbol in the most significant
bit.

Sample points and Birkhoff sums ride along the pullback: if ``y`` is a sample
of ``C_w`` then ``g_s(y)`` is a sample of the new cylinder and
``S_n(g_s(y)) = phi(g_s(y)) + S_{n-1}(y)``.  When the image clips ``C_w`` the
samples are regenerated inside the new cylinder and summed forward.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .errors import DepthCapError
from .lorenz_map import (
    EMPTY_WIDTH,
    LEFT,
    RIGHT,
    LorenzMap,
    boundary_periodic_point,
    pullback_interval,
    word_to_str,
)

#: relative inward offset of the outermost sample points
EDGE_OFFSET = 1e-9
#: blocks of a streamed level hold about 2**STREAM_BLOCK_DEPTH cylinders
STREAM_BLOCK_DEPTH = 16


def sample_positions(s: int) -> np.ndarray:
    """Relative positions in (0, 1) of ``s`` samples, ends offset inward."""
    if s < 1:
        raise ValueError("need at least one sample")
    if s == 1:
        return np.array([0.5])
    return np.linspace(EDGE_OFFSET, 1.0 - EDGE_OFFSET, s)


@dataclass(frozen=True)
class Cylinder:
    word: tuple
    lo: float
    hi: float

    @property
    def depth(self) -> int:
        return len(self.word)

    @property
    def word_str(self) -> str:
        return word_to_str(self.word)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, x) -> bool:
        return self.lo < x < self.hi


@dataclass
class Level:
    """All cylinders of one depth as parallel arrays."""

    depth: int
    lo: np.ndarray
    hi: np.ndarray
    codes: np.ndarray
    samples: Optional[np.ndarray] = None
    sums: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.lo)

    def words(self) -> list[tuple]:
        n = self.depth
        return [tuple((int(c) >> (n - 1 - j)) & 1 for j in range(n)) for c in self.codes]

    def cylinders(self) -> list[Cylinder]:
        return [Cylinder(w, float(a), float(b)) for w, a, b in zip(self.words(), self.lo, self.hi)]


def check_depth(lmap: LorenzMap, n: int):
    if n < 1:
        raise ValueError("depth must be >= 1")
    if n > lmap.depth_cap:
        raise DepthCapError(
            f"depth {n} exceeds cap {lmap.depth_cap} (up to 2^{n} = {2 ** n} cylinders)")


def _forward_sums(lmap, x, codes, depth, phi):
    """Birkhoff sums of length ``depth`` at points ``x`` guided by word codes."""
    total = np.zeros_like(x)
    cur = x.copy()
    for j in range(depth):
        sym = ((codes >> (depth - 1 - j)) & 1)[:, None] * np.ones_like(cur, dtype=np.int64)
        total += phi(cur)
        if j + 1 < depth:
            cur = np.asarray(lmap.branch(cur, sym), dtype=float)
    return total


def base_level(lmap: LorenzMap, phi=None, rel=None) -> Level:
    lo = np.array([0.0, lmap.d])
    hi = np.array([lmap.d, 1.0])
    lvl = Level(1, lo, hi, np.array([0, 1], dtype=np.int64))
    if rel is not None:
        lvl.samples = lo[:, None] + rel[None, :] * (hi - lo)[:, None]
        if phi is not None:
            lvl.sums = np.asarray(phi(lvl.samples), dtype=float)
    return lvl


def pull(lmap: LorenzMap, tail: Level, sym: int, phi=None, rel=None) -> Level:
    """Prefix ``sym`` to every word of ``tail``; drop empty results."""
    a, b = lmap.image(sym)
    lo = np.maximum(tail.lo, a)
    hi = np.minimum(tail.hi, b)
    keep = hi - lo > EMPTY_WIDTH
    clipped = ((tail.lo < a) | (tail.hi > b))[keep]
    lo, hi = lo[keep], hi[keep]
    new_lo = np.asarray(lmap.inverse(lo, sym), dtype=float)
    new_hi = np.asarray(lmap.inverse(hi, sym), dtype=float)
    depth = tail.depth + 1
    codes = tail.codes[keep] | (np.int64(sym) << np.int64(tail.depth))
    keep_w = new_hi - new_lo > EMPTY_WIDTH
    if not keep_w.all():
        new_lo, new_hi, codes, clipped = new_lo[keep_w], new_hi[keep_w], codes[keep_w], clipped[keep_w]
        keep = np.flatnonzero(keep)[keep_w]
    lvl = Level(depth, new_lo, new_hi, codes)
    if rel is None or tail.samples is None:
        return lvl
    samples = np.asarray(lmap.inverse(tail.samples[keep], sym), dtype=float)
    if phi is not None:
        sums = np.asarray(phi(samples), dtype=float) + tail.sums[keep]
    if clipped.any():
        idx = np.flatnonzero(clipped)
        fresh = new_lo[idx, None] + rel[None, :] * (new_hi - new_lo)[idx, None]
        samples[idx] = fresh
        if phi is not None:
            sums[idx] = _forward_sums(lmap, fresh, codes[idx], depth, phi)
    lvl.samples = samples
    if phi is not None:
        lvl.sums = sums
    return lvl


def concat(levels: Sequence[Level]) -> Level:
    levels = [lv for lv in levels if len(lv)]
    first = levels[0]
    out = Level(first.depth,
                np.concatenate([lv.lo for lv in levels]),
                np.concatenate([lv.hi for lv in levels]),
                np.concatenate([lv.codes for lv in levels]))
    if first.samples is not None:
        out.samples = np.concatenate([lv.samples for lv in levels])
    if first.sums is not None:
        out.sums = np.concatenate([lv.sums for lv in levels])
    return out


def iter_levels(lmap: LorenzMap, n_max: int, phi=None, samples: Optional[int] = None) -> Iterator[Level]:
    """Yield full levels of depth 1..n_max in order."""
    check_depth(lmap, n_max)
    rel = None if samples is None else sample_positions(samples)
    lvl = base_level(lmap, phi, rel)
    yield lvl
    for _ in range(1, n_max):
        lvl = concat([pull(lmap, lvl, LEFT, phi, rel), pull(lmap, lvl, RIGHT, phi, rel)])
        yield lvl


def level(lmap: LorenzMap, n: int, phi=None, samples: Optional[int] = None) -> Level:
    for lvl in iter_levels(lmap, n, phi, samples):
        pass
    return lvl


def stream_level(lmap: LorenzMap, n: int, phi=None, samples: Optional[int] = None,
                 threads: int = 1, block_depth: int = STREAM_BLOCK_DEPTH,
                 visitor: Optional[Callable[[Level], object]] = None) -> list:
    """Visit the depth-n level in blocks sharing a common word prefix.

    Blocks are produced in lexicographic prefix order, so concatenating them
    reproduces the sorted level.  With ``threads > 1`` blocks are computed
    concurrently; the returned list keeps prefix order regardless, so any
    reduction performed over it in order is deterministic.  ``visitor`` is
    applied to each block inside the worker and must be safe to call
    concurrently; its results are returned in prefix order.
    """
    check_depth(lmap, n)
    m = max(0, n - block_depth)
    rel = None if samples is None else sample_positions(samples)
    tail = level(lmap, n - m, phi, samples)
    visit = visitor or (lambda blk: blk)

    def run(prefix):
        blk = tail
        for sym in reversed(prefix):
            blk = pull(lmap, blk, sym, phi, rel)
            if not len(blk):
                break
        return visit(blk)

    prefixes = list(product((LEFT, RIGHT), repeat=m))
    if threads > 1 and len(prefixes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, prefixes))
    return [run(p) for p in prefixes]


def enumerate_cylinders(lmap: LorenzMap, n: int) -> list[Cylinder]:
    """All nonempty depth-n cylinders, sorted by left endpoint."""
    return level(lmap, n).cylinders()


class Subset:
    """A subset S of [0, 1] used to select cylinders whose closure meets S."""

    def __init__(self, kind: str, points=(), lo: float = 0.0, hi: float = 1.0, label: str = ""):
        if kind not in ("full", "points", "interval"):
            raise ValueError(f"unknown subset kind {kind!r}")
        self.kind = kind
        self.points = np.asarray(sorted(points), dtype=float)
        self.lo, self.hi = lo, hi
        self.label = label or self._describe()

    @classmethod
    def full(cls):
        return cls("full", label="[0,1]")

    @classmethod
    def of_points(cls, pts, label=""):
        return cls("points", points=pts, label=label)

    @classmethod
    def interval(cls, lo, hi, label=""):
        if lo > hi:
            raise ValueError("empty interval")
        return cls("interval", lo=lo, hi=hi, label=label)

    @classmethod
    def boundary(cls, lmap: LorenzMap):
        return cls("points", points=(0.0, lmap.d, 1.0), label="boundary{0,d,1}")

    def _describe(self):
        if self.kind == "full":
            return "[0,1]"
        if self.kind == "interval":
            return f"[{self.lo:.12g},{self.hi:.12g}]"
        return "{" + ",".join(f"{p:.12g}" for p in self.points) + "}"

    def __repr__(self):
        return f"Subset({self.label})"

    def mask(self, lo: np.ndarray, hi: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """Which closed intervals [lo, hi] meet S (within ``tol``)."""
        if self.kind == "full":
            return np.ones(len(lo), dtype=bool)
        if self.kind == "interval":
            return (lo <= self.hi + tol) & (hi >= self.lo - tol)
        if len(self.points) == 0:
            return np.zeros(len(lo), dtype=bool)
        # first point >= lo - tol must also be <= hi + tol
        idx = np.searchsorted(self.points, lo - tol, side="left")
        ok = idx < len(self.points)
        out = np.zeros(len(lo), dtype=bool)
        out[ok] = self.points[idx[ok]] <= hi[ok] + tol
        return out

    def contains(self, x: float, tol: float = 1e-12) -> bool:
        return bool(self.mask(np.array([x]), np.array([x]), tol)[0])


def as_subset(lmap: LorenzMap, S) -> Subset:
    if isinstance(S, Subset):
        return S
    if S is None or S == "full":
        return Subset.full()
    if S == "boundary":
        return Subset.boundary(lmap)
    if isinstance(S, tuple) and len(S) == 2 and not isinstance(S[0], (list, tuple)):
        return Subset.interval(*S)
    return Subset.of_points(list(S))


def touching(lmap: LorenzMap, n: int, S) -> list[Cylinder]:
    S = as_subset(lmap, S)
    lvl = level(lmap, n)
    m = S.mask(lvl.lo, lvl.hi)
    return [c for c, keep in zip(lvl.cylinders(), m) if keep]


def boundary_cylinder(lmap: LorenzMap, k: int, side: str) -> Cylinder:
    """Cylinder of depth N_k with d on its boundary on the given side."""
    orb = boundary_periodic_point(lmap, k, side)
    lo, hi = pullback_interval(lmap, orb.word)
    return Cylinder(orb.word, lo, hi)


def to_csv(cylinders: Sequence[Cylinder], header_comment: str = "") -> str:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["depth", "word", "lo", "hi"])
    for c in sorted(cylinders, key=lambda c: (c.depth, c.lo)):
        w.writerow([c.depth, c.word_str, repr(float(c.lo)), repr(float(c.hi))])
    return buf.getvalue()


def measure_defect(lmap: LorenzMap, n: int) -> float:
    """|sum of cylinder widths - 1| at depth n."""
    lvl = level(lmap, n)
    return abs(math.fsum((lvl.hi - lvl.lo).tolist()) - 1.0)
