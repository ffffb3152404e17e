"""One-dimensional Lorenz-like expanding maps.

A map is defined on [0, 1] with a single discontinuity ``d``.  Both branches
are increasing, the left branch runs from ``(0, y0)`` up to ``(d, 1)`` and the
right branch from ``(d, 0)`` up to ``(1, y1)``.  Symbols are ``0`` for the left
partition element ``(0, d)`` and ``1`` for the right element ``(d, 1)``; the
public API renders them as ``"L"`` and ``"R"``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    AdmissibilityError,
    ConvergenceError,
    DepthCapError,
    DiscontinuityError,
    DomainError,
    LorenzError,
)

SQRT2 = math.sqrt(2.0)
LEFT, RIGHT = 0, 1
SYMBOLS = "LR"
SIDES = ("plus", "minus")
_BRANCH_NAMES = {"left": LEFT, "right": RIGHT, "L": LEFT, "R": RIGHT}

#: two endpoints closer than this are treated as the same point
EMPTY_WIDTH = 1e-15


def word_to_str(word: Sequence[int]) -> str:
    return "".join(SYMBOLS[s] for s in word)


def parse_word(word) -> tuple[int, ...]:
    if isinstance(word, str):
        return tuple(SYMBOLS.index(c) for c in word.upper())
    out = []
    for s in word:
        if isinstance(s, str):
            out.append(SYMBOLS.index(s.upper()))
        else:
            out.append(int(s))
    return tuple(out)


def _check_side(side):
    if side is not None and side not in SIDES:
        raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")


@dataclass(frozen=True)
class LorenzMap:
    """A Lorenz-like expanding map given by its two branches and their inverses.

    The branch callables must accept numpy arrays.  ``min_slope`` is a lower
    bound for the derivative on both branches and ``lam`` an upper bound for
    the derivative of both inverse branches.
    """

    d: float
    left: Callable
    right: Callable
    left_inv: Callable
    right_inv: Callable
    y0: float
    y1: float
    min_slope: float
    lam: float
    name: str = "lorenz"
    tol_d: float = 1e-12
    residual_tol: float = 1e-12
    depth_cap: int = 26
    hit_policy: str = "error"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 0.0 < self.d < 1.0:
            raise DomainError(f"discontinuity must lie in (0, 1), got {self.d}")
        if not self.min_slope > SQRT2:
            raise LorenzError(f"min_slope {self.min_slope} must exceed sqrt(2)")
        if self.lam > 1.0 / self.min_slope * (1 + 1e-12):
            raise LorenzError("lam must not exceed 1/min_slope")
        if abs(float(self.left(np.float64(self.d))) - 1.0) > 1e-9:
            raise LorenzError("left branch must tend to 1 at d")
        if abs(float(self.right(np.float64(self.d)))) > 1e-9:
            raise LorenzError("right branch must tend to 0 at d")
        if self.hit_policy not in ("error", "propagate"):
            raise ValueError("hit_policy must be 'error' or 'propagate'")
        xs = np.linspace(0.0, self.d, 257)
        if np.any(np.diff(self.left(xs)) <= 0):
            raise LorenzError("left branch is not strictly increasing")
        xs = np.linspace(self.d, 1.0, 257)
        if np.any(np.diff(self.right(xs)) <= 0):
            raise LorenzError("right branch is not strictly increasing")

    # -- geometry ---------------------------------------------------------
    def image(self, symbol: int) -> tuple[float, float]:
        """Closed image interval of the branch carrying ``symbol``."""
        return (self.y0, 1.0) if symbol == LEFT else (0.0, self.y1)

    def domain(self, symbol: int) -> tuple[float, float]:
        return (0.0, self.d) if symbol == LEFT else (self.d, 1.0)

    def branch(self, x, symbol):
        """Apply the branch selected by ``symbol`` (scalar or array)."""
        x = np.asarray(x, dtype=float)
        symbol = np.asarray(symbol)
        out = np.where(symbol == LEFT, self.left(x), self.right(x))
        return out if out.ndim else float(out)

    def inverse(self, y, symbol):
        """Inverse branch selected by ``symbol``; no range checking."""
        y = np.asarray(y, dtype=float)
        symbol = np.asarray(symbol)
        out = np.where(symbol == LEFT, self.left_inv(y), self.right_inv(y))
        return out if out.ndim else float(out)

    # -- pointwise operations ---------------------------------------------
    def evaluate(self, x: float, side: Optional[str] = None) -> float:
        _check_side(side)
        if not 0.0 <= x <= 1.0:
            raise DomainError(f"x={x} outside [0, 1]")
        if x == self.d:
            if side is None:
                raise DiscontinuityError("ambiguous at discontinuity")
            return 0.0 if side == "plus" else 1.0
        return float(self.left(x)) if x < self.d else float(self.right(x))

    __call__ = evaluate

    def inverse_branch(self, y: float, branch) -> float:
        sym = _BRANCH_NAMES.get(branch, branch)
        if sym not in (LEFT, RIGHT):
            raise ValueError(f"unknown branch {branch!r}")
        lo, hi = self.image(sym)
        if not lo <= y <= hi:
            raise DomainError("no preimage on branch")
        return float(self.inverse(y, sym))

    def symbol_of(self, x: float, side: Optional[str] = None) -> int:
        if x == self.d:
            if side is None:
                raise DiscontinuityError("ambiguous at discontinuity")
            return RIGHT if side == "plus" else LEFT
        return LEFT if x < self.d else RIGHT

    def orbit_sides(self, x: float, n: int, side0: Optional[str] = None,
                    hit_policy: Optional[str] = None) -> list[tuple[float, Optional[str]]]:
        """Orbit points paired with the side used whenever a point equals d."""
        _check_side(side0)
        if n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 <= x <= 1.0:
            raise DomainError(f"x={x} outside [0, 1]")
        policy = hit_policy or self.hit_policy
        out = []
        cur = x
        for i in range(n):
            side = None
            if i == 0 and cur == self.d:
                if side0 is None:
                    raise DiscontinuityError("ambiguous at discontinuity")
                side = side0
            elif i > 0 and abs(cur - self.d) <= self.tol_d:
                if policy == "propagate" and side0 is not None:
                    cur, side = self.d, side0
                else:
                    raise DiscontinuityError(f"orbit hits discontinuity at step {i}")
            out.append((cur, side))
            if i + 1 < n:
                cur = self.evaluate(cur, side)
        return out

    def orbit(self, x: float, n: int, side0: Optional[str] = None,
              hit_policy: Optional[str] = None) -> list[float]:
        return [p for p, _ in self.orbit_sides(x, n, side0, hit_policy)]

    def with_options(self, **kw) -> "LorenzMap":
        from dataclasses import replace

        return replace(self, **kw)


def affine(d: float, y0: float, y1: float, **kw) -> LorenzMap:
    """Piecewise-affine Lorenz map through (0,y0), (d,1) and (d,0), (1,y1)."""
    if not (0.0 < d < 1.0 and 0.0 <= y0 < 1.0 and 0.0 < y1 <= 1.0):
        raise DomainError("need 0<d<1, 0<=y0<1, 0<y1<=1")
    sl = (1.0 - y0) / d
    sr = y1 / (1.0 - d)
    if not (sl > SQRT2 and sr > SQRT2):
        raise LorenzError(f"branch slopes {sl:.4g}, {sr:.4g} must exceed sqrt(2)")

    def left(x):
        x = np.asarray(x, dtype=float)
        return np.where(x == d, 1.0, y0 + sl * x)

    def right(x):
        x = np.asarray(x, dtype=float)
        return np.where(x == 1.0, y1, sr * (x - d))

    def left_inv(y):
        y = np.asarray(y, dtype=float)
        x = d * (y - y0) / (1.0 - y0)
        return np.where(y == 1.0, d, np.where(y == y0, 0.0, x))

    def right_inv(y):
        y = np.asarray(y, dtype=float)
        x = d + (1.0 - d) * y / y1
        return np.where(y == 0.0, d, np.where(y == y1, 1.0, x))

    kw.setdefault("name", f"affine(d={d:g},y0={y0:g},y1={y1:g})")
    slope = min(sl, sr)
    return LorenzMap(d=d, left=left, right=right, left_inv=left_inv,
                     right_inv=right_inv, y0=y0, y1=y1, min_slope=slope,
                     lam=1.0 / slope, params={"kind": "affine", "d": d, "y0": y0, "y1": y1,
                                              "left_slope": sl, "right_slope": sr}, **kw)


def doubling(**kw) -> LorenzMap:
    """x -> 2x mod 1 with d = 1/2, the full-branch model case."""
    kw.setdefault("name", "doubling")
    m = affine(0.5, 0.0, 1.0, **kw)
    m.params["kind"] = "doubling"
    return m


# -- module-level forms of the point operations --------------------------------

def evaluate(lmap: LorenzMap, x: float, side: Optional[str] = None) -> float:
    return lmap.evaluate(x, side)


def inverse_branch(lmap: LorenzMap, y: float, branch) -> float:
    return lmap.inverse_branch(y, branch)


def orbit(lmap: LorenzMap, x: float, n: int, side0: Optional[str] = None) -> list[float]:
    return lmap.orbit(x, n, side0)


# -- intervals and itineraries ---------------------------------------------------

def pullback_interval(lmap: LorenzMap, word: Sequence[int]) -> Optional[tuple[float, float]]:
    """Closed interval of points with itinerary ``word``, or None if empty."""
    word = parse_word(word)
    if not word:
        raise ValueError("word must be nonempty")
    lo, hi = lmap.domain(word[-1])
    for sym in reversed(word[:-1]):
        a, b = lmap.image(sym)
        lo, hi = max(lo, a), min(hi, b)
        if hi - lo <= EMPTY_WIDTH:
            return None
        lo, hi = lmap.inverse(lo, sym), lmap.inverse(hi, sym)
    return (float(lo), float(hi))


def boundary_word(lmap: LorenzMap, n: int, side: str) -> tuple[int, ...]:
    """Itinerary of length ``n`` of d approached from ``side``."""
    _check_side(side)
    if side == "plus":
        word, z = [RIGHT], 0.0
    else:
        word, z = [LEFT], 1.0
    for _ in range(n - 1):
        if abs(z - lmap.d) <= lmap.tol_d:
            sym = RIGHT if side == "plus" else LEFT
            word.append(sym)
            z = 0.0 if sym == RIGHT else 1.0
            continue
        sym = LEFT if z < lmap.d else RIGHT
        word.append(sym)
        z = float(lmap.branch(z, sym))
    return tuple(word)


def _advance(lmap, a, b, anchor_left):
    """Image of an interval lying on one side of d; the anchor keeps its role."""
    d = lmap.d
    if b <= d:
        return float(lmap.branch(a, LEFT)), (1.0 if b == d else float(lmap.branch(b, LEFT)))
    return (0.0 if a == d else float(lmap.branch(a, RIGHT))), float(lmap.branch(b, RIGHT))


def cutting_times(lmap: LorenzMap, n_max: int, side: str = "plus") -> list[int]:
    """Depths N <= n_max at which the tracked image interval contains d.

    ``side='plus'`` starts from A_0 = (d, 1) and follows the component holding
    the image of d+; ``side='minus'`` is the mirror construction from (0, d).
    """
    _check_side(side)
    d, tol = lmap.d, lmap.tol_d
    a, b = (d, 1.0) if side == "plus" else (0.0, d)
    out = []
    for n in range(1, n_max + 1):
        a, b = _advance(lmap, a, b, side == "plus")
        if abs(a - d) <= tol:
            a = d
        if abs(b - d) <= tol:
            b = d
        if a < d < b:
            out.append(n)
            a, b = (a, d) if side == "plus" else (d, b)
    return out


# -- periodic points next to the discontinuity ----------------------------------

@dataclass(frozen=True)
class PeriodicOrbit:
    point: float
    period: int
    orbit: tuple
    side: str
    residual: float
    word: tuple = ()

    @property
    def word_str(self) -> str:
        return word_to_str(self.word)


def _iteration_budget(lmap, n):
    return 10 * math.ceil(n * math.log(1.0 / 1e-12) / math.log(1.0 / lmap.lam))


def periodic_point(lmap: LorenzMap, word: Sequence[int], side: Optional[str] = None,
                   tol: Optional[float] = None) -> PeriodicOrbit:
    """Fixed point of the composed inverse branches along ``word``.

    The composition contracts by at most lam**len(word), so plain backward
    iteration converges linearly.  The orbit is read off the intermediate
    values of the final pass, which keeps full relative precision near 0.
    """
    word = parse_word(word)
    n = len(word)
    tol = lmap.residual_tol if tol is None else tol
    cyl = pullback_interval(lmap, word)
    if cyl is None:
        raise AdmissibilityError(f"cylinder {word_to_str(word)} is empty")
    lo, hi = cyl

    def chain(p):
        u = [0.0] * (n + 1)
        u[n] = p
        moved = 0.0
        for i in range(n - 1, -1, -1):
            a, b = lmap.image(word[i])
            y = min(max(u[i + 1], a), b)
            moved = max(moved, abs(y - u[i + 1]))
            u[i] = float(lmap.inverse(y, word[i]))
        return u, moved

    x = 0.5 * (lo + hi)
    budget = _iteration_budget(lmap, n)
    step = math.inf
    for _ in range(budget):
        u, _ = chain(x)
        step = abs(u[0] - x)
        x = u[0]
        if step <= 1e-16 * max(1.0, abs(x)):
            break
    else:
        if step > tol:
            raise ConvergenceError(
                f"backward iteration for {word_to_str(word)} did not converge "
                f"in {budget} steps (last step {step:.3g})", residual=step)
    u, moved = chain(x)
    if moved > tol:
        raise AdmissibilityError(f"periodic itinerary {word_to_str(word)} is not realized")
    pts = u[:n]
    p = pts[0]
    if not lo - tol <= p <= hi + tol:
        raise AdmissibilityError("fixed point left its cylinder")
    residual = 0.0
    for i in range(n):
        nxt = pts[(i + 1) % n]
        img = (0.0 if word[i] == RIGHT else 1.0) if pts[i] == lmap.d else float(lmap.branch(pts[i], word[i]))
        residual = max(residual, abs(img - nxt))
    if residual > tol:
        raise ConvergenceError(f"residual {residual:.3g} above tolerance", residual=residual)
    if n > 1 and np.min(np.diff(np.sort(pts))) <= 1e-14:
        raise AdmissibilityError(f"word {word_to_str(word)} is not primitive")
    if side is None:
        side = "plus" if p > lmap.d else "minus"
    return PeriodicOrbit(point=p, period=n, orbit=tuple(pts), side=side,
                         residual=residual, word=word)


def boundary_orbits(lmap: LorenzMap, side: str, depth_cap: Optional[int] = None):
    """Yield PeriodicOrbit for every depth whose boundary cylinder carries one."""
    _check_side(side)
    cap = lmap.depth_cap if depth_cap is None else depth_cap
    for n in range(1, cap + 1):
        word = boundary_word(lmap, n, side)
        try:
            orb = periodic_point(lmap, word, side=side)
        except (AdmissibilityError, ConvergenceError):
            continue
        if (side == "plus") != (orb.point > lmap.d):
            continue
        yield orb


def boundary_periodic_point(lmap: LorenzMap, k: int, side: str) -> PeriodicOrbit:
    """The k-th periodic point p_k on ``side`` of d (k counts from 1)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    for i, orb in enumerate(boundary_orbits(lmap, side), start=1):
        if i == k:
            return orb
    raise DepthCapError(
        f"fewer than {k} boundary periodic points up to depth cap {lmap.depth_cap} "
        f"(enumeration bound 2^{lmap.depth_cap})")


def boundary_depth(lmap: LorenzMap, k: int, side: str) -> int:
    return boundary_periodic_point(lmap, k, side).period
