"""Potentials, perturbations, variations and regularity diagnostics."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .cylinders import level
from .errors import DiscontinuityError, DomainError, PreconditionError
from .lorenz_map import LorenzMap, PeriodicOrbit, pullback_interval

TAGS = ("piecewise-continuous", "holder", "weak-holder", "quasi-weak-holder", "unknown")
DEPTH_RULES = ("zero-chain", "constant", "scale")
DEFAULT_SAMPLES = 9
#: peak of an eps-bump relative to eps, keeping the sup norm strictly below eps
EPS_PEAK = 0.999
MIN_ORBIT_GAP = 1e-10
#: ratios within this of 1 (or above) mean the terms have stopped decaying
RATIO_FLAT_TOL = 1e-6


@dataclass(frozen=True)
class Potential:
    """A real function on [0, 1], vectorized over interior points.

    ``at_d`` optionally holds the one-sided limits ``(phi(d-), phi(d+))`` for
    potentials that jump at the discontinuity; otherwise ``func(d)`` is used
    on both sides.
    """

    func: Callable[[np.ndarray], np.ndarray]
    sup_bound: float
    inf_bound: float
    tag: str = "unknown"
    name: str = ""
    continuous: bool = True
    at_d: Optional[tuple[float, float]] = None
    d: Optional[float] = None
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.asarray(self.func(x), dtype=float)
        if out.shape != x.shape:
            out = np.broadcast_to(out, x.shape).copy()
        return out if out.ndim else float(out)

    def value(self, x: float, side: Optional[str] = None) -> float:
        """Pointwise value; at d the requested one-sided limit."""
        if not 0.0 <= x <= 1.0:
            raise DomainError(f"x={x} outside [0,1]")
        if self.at_d is not None and self.d is not None and x == self.d:
            lo, hi = self.at_d
            if side is None:
                if lo != hi:
                    raise DiscontinuityError("potential ambiguous at discontinuity")
                return lo
            return lo if side == "minus" else hi
        return float(self(x))

    def shift(self, c: float) -> "Potential":
        f = self.func
        at_d = None if self.at_d is None else (self.at_d[0] + c, self.at_d[1] + c)
        return replace(self, func=lambda x: f(x) + c, sup_bound=self.sup_bound + c,
                       inf_bound=self.inf_bound + c, at_d=at_d,
                       name=f"{self.name}{c:+g}")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return self.shift(float(other))
        f, g = self.func, other.func
        at_d = None
        if self.at_d is not None or other.at_d is not None:
            d = self.d if self.d is not None else other.d
            a = self.at_d or (float(f(np.float64(d))),) * 2
            b = other.at_d or (float(g(np.float64(d))),) * 2
            at_d = (a[0] + b[0], a[1] + b[1])
        tag = self.tag if self.tag == other.tag == "holder" else (
            "piecewise-continuous" if self.continuous and other.continuous else "unknown")
        return Potential(lambda x: f(x) + g(x), self.sup_bound + other.sup_bound,
                         self.inf_bound + other.inf_bound, tag=tag,
                         name=f"({self.name}+{other.name})",
                         continuous=self.continuous and other.continuous,
                         at_d=at_d, d=self.d if self.d is not None else other.d)

    __radd__ = __add__


# -- built-in families ------------------------------------------------------

def constant(c: float) -> Potential:
    c = float(c)
    return Potential(lambda x: np.full_like(np.asarray(x, dtype=float), c), c, c,
                     tag="holder", name=f"const({c:g})", params={"alpha": 1.0, "K": 0.0})


def identity() -> Potential:
    return Potential(lambda x: np.asarray(x, dtype=float), 1.0, 0.0, tag="holder",
                     name="x", params={"alpha": 1.0, "K": 1.0})


def scaled_log_slope(t: float, slope: float = 2.0) -> Potential:
    """Constant -t*log(slope): the geometric potential of an affine full-branch map."""
    p = constant(-t * math.log(slope))
    return replace(p, name=f"-{t:g}*log({slope:g})")


def holder(alpha: float, K: float, center: float = 0.5) -> Potential:
    """K*|x - center|**alpha, a Hölder(alpha, K) sample."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    top = K * max(center, 1 - center) ** alpha
    return Potential(lambda x: K * np.abs(np.asarray(x, dtype=float) - center) ** alpha,
                     max(top, 0.0), min(top, 0.0), tag="holder",
                     name=f"holder({alpha:g},{K:g})", params={"alpha": alpha, "K": K})


def planted_weak_holder(gamma: float, A: float, lam: float = 0.5) -> Potential:
    """A*x**alpha with lam**alpha = gamma.

    On a map whose cylinders at 0 have length lam**n (the doubling map for
    lam = 1/2) the largest depth-n oscillation is exactly A*gamma**n.
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    alpha = math.log(gamma) / math.log(lam)
    return Potential(lambda x: A * np.asarray(x, dtype=float) ** alpha, A, 0.0,
                     tag="weak-holder", name=f"planted({gamma:g},{A:g})",
                     params={"gamma": gamma, "A": A, "alpha": alpha})


def step(at: float, height: float = 1.0) -> Potential:
    """Indicator of [at, 1] scaled by ``height``; discontinuous at ``at``."""
    return Potential(lambda x: np.where(np.asarray(x, dtype=float) >= at, height, 0.0),
                     max(height, 0.0), min(height, 0.0), tag="unknown",
                     name=f"step({at:g})", continuous=False)


def tabulated(xs: Sequence[float], ys: Sequence[float], at_d=None, d=None,
              name: str = "tabulated") -> Potential:
    """Piecewise-linear interpolation of (x, value) knots."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or len(xs) < 2:
        raise ValueError("need matching 1-d knot arrays of length >= 2")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("knots must be strictly increasing")
    if xs[0] > 0 or xs[-1] < 1:
        raise ValueError("knots must cover [0, 1]")
    lo, hi = float(ys.min()), float(ys.max())
    if at_d is not None:
        lo, hi = min(lo, *at_d), max(hi, *at_d)
    slope = float(np.max(np.abs(np.diff(ys) / np.diff(xs))))
    return Potential(lambda x: np.interp(x, xs, ys), hi, lo, tag="holder", name=name,
                     at_d=None if at_d is None else tuple(at_d), d=d,
                     params={"alpha": 1.0, "K": slope, "knots": len(xs)})


def load_tabulated(path: str, at_d=None, d=None) -> Potential:
    """Read ``x,value`` rows (``#`` comments and a header row allowed)."""
    xs, ys = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(line for line in fh if not line.lstrip().startswith("#")):
            if not row:
                continue
            try:
                xs.append(float(row[0]))
                ys.append(float(row[1]))
            except ValueError:
                if xs:
                    raise
    return tabulated(xs, ys, at_d=at_d, d=d, name=f"tabulated({path})")


def sin_like(knots: int = 65, amplitude: float = 0.5) -> Potential:
    """Tabulated sample of amplitude*sin(2*pi*x) on a uniform grid."""
    xs = np.linspace(0.0, 1.0, knots)
    return tabulated(xs, amplitude * np.sin(2 * np.pi * xs), name="sin-like")


# -- bump perturbations -----------------------------------------------------

@dataclass(frozen=True)
class BumpPerturbation(Potential):
    centers: tuple = ()
    heights: tuple = ()
    delta: float = 0.0


def default_delta(lmap: LorenzMap, points: Sequence[float]) -> float:
    """A third of the smallest gap between orbit points.

    A single fixed point has no gap, so the distance to the nearest other
    point of {0, d, 1} is used instead.
    """
    pts = np.sort(np.asarray(points, dtype=float))
    if len(pts) > 1:
        gap = float(np.min(np.diff(pts)))
        if gap < MIN_ORBIT_GAP:
            raise PreconditionError(f"orbit points coincide (gap {gap:.3g})")
    else:
        others = [abs(b - pts[0]) for b in (0.0, lmap.d, 1.0) if abs(b - pts[0]) > MIN_ORBIT_GAP]
        gap = min(others)
    return gap / 3.0


def _heights(rule, n: int) -> np.ndarray:
    if rule is None:
        return 1.0 / np.arange(1, n + 1)
    if callable(rule):
        return np.array([float(rule(j)) for j in range(n)])
    a = np.asarray(rule, dtype=float)
    if len(a) < n:
        raise ValueError(f"need {n} heights, got {len(a)}")
    return a[:n]


def _bump_func(centers: np.ndarray, heights: np.ndarray, delta: float):
    order = np.argsort(centers)
    c, a = centers[order], heights[order]
    d2 = delta * delta

    def f(x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(c, x)
        lo = np.clip(idx - 1, 0, len(c) - 1)
        hi = np.clip(idx, 0, len(c) - 1)
        j = np.where(np.abs(x - c[lo]) <= np.abs(x - c[hi]), lo, hi)
        u2 = (x - c[j]) ** 2
        inside = u2 < d2
        out = np.zeros_like(x)
        # a * M * exp(-1/(delta^2-u^2)) with M = exp(1/delta^2), in a stable form
        out[inside] = a[j[inside]] * np.exp(-u2[inside] / (d2 * (d2 - u2[inside])))
        return out

    return f


def build_bump(lmap: LorenzMap, orbit: PeriodicOrbit, heights=None,
               delta: Optional[float] = None) -> BumpPerturbation:
    """Smooth bumps of half-width ``delta`` peaking at a_j on the j-th orbit point."""
    pts = np.asarray(orbit.orbit, dtype=float)
    auto = default_delta(lmap, pts)
    if delta is None:
        delta = auto
    elif delta <= 0:
        raise ValueError("delta must be positive")
    elif len(pts) > 1 and 2 * delta >= float(np.min(np.diff(np.sort(pts)))):
        raise PreconditionError("bump intervals would overlap")
    a = _heights(heights, len(pts))
    return BumpPerturbation(
        func=_bump_func(pts, a, delta), sup_bound=float(max(a.max(), 0.0)),
        inf_bound=float(min(a.min(), 0.0)), tag="holder", name=f"bump[{orbit.word_str}]",
        centers=tuple(pts.tolist()), heights=tuple(a.tolist()), delta=float(delta),
        params={"period": orbit.period, "side": orbit.side})


def build_eps_bump(lmap: LorenzMap, orbit: PeriodicOrbit, eps: float,
                   delta: Optional[float] = None) -> BumpPerturbation:
    """Bumps of common height just under ``eps``, so the sup norm is < eps."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    return build_bump(lmap, orbit, heights=[eps * EPS_PEAK] * orbit.period, delta=delta)


# -- phase-transition family --------------------------------------------------

def zero_chain(lmap: LorenzMap, depth: Optional[int] = None) -> np.ndarray:
    """Right ends c_1 > c_2 > ... of the cylinders whose closure contains 0."""
    depth = depth or lmap.depth_cap
    word, x = [], 0.0
    for _ in range(depth):
        s = lmap.symbol_of(x, "plus")
        word.append(s)
        x = lmap.evaluate(x, "plus")
    ends = []
    for m in range(1, depth + 1):
        iv = pullback_interval(lmap, word[:m])
        if iv is None:
            break
        ends.append(iv[1])
    return np.array(ends)


@dataclass(frozen=True)
class PhaseFamilyPotential(Potential):
    t: float = 1.0
    depth_rule: str = "zero-chain"
    chain: tuple = ()

    def depth_of(self, x):
        """The exponent n(x) selected by the depth rule."""
        return _depth_fn(self.depth_rule, np.asarray(self.chain), self.params)(np.asarray(x, float))


def _depth_fn(rule, chain, params):
    if rule == "constant":
        n = int(params["n"])
        return lambda x: np.full(np.shape(x), n)
    if rule == "scale":
        lam = params["lam"]
        cap = params["cap"]
        return lambda x: np.clip(np.ceil(np.log(np.maximum(x, 1e-300)) / math.log(lam)), 1, cap).astype(int)
    neg = -chain  # increasing

    def zc(x):
        # number of chain ends >= x, i.e. max{m : x <= c_m}
        return np.maximum(np.searchsorted(neg, -x, side="right"), 1)

    return zc


def phase_family(lmap: LorenzMap, t: float, depth_rule: str = "zero-chain",
                 n: Optional[int] = None) -> PhaseFamilyPotential:
    """x -> [t(1 - ln x)]**(-n(x)), with value 0 at x = 0."""
    if t == 0:
        raise PreconditionError("t = 0 makes the phase family singular")
    if depth_rule not in DEPTH_RULES:
        raise ValueError(f"depth_rule must be one of {DEPTH_RULES}")
    chain = zero_chain(lmap)
    params = {"t": t, "cap": lmap.depth_cap}
    if depth_rule == "constant":
        params["n"] = 1 if n is None else int(n)
    if depth_rule == "scale":
        params["lam"] = lmap.lam
    depth = _depth_fn(depth_rule, chain, params)

    def f(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        xp = x[pos]
        with np.errstate(over="ignore", divide="ignore"):
            out[pos] = (t * (1.0 - np.log(xp))) ** (-depth(xp).astype(float))
        return out

    grid = np.linspace(0.0, 1.0, 2049)
    vals = f(grid)
    return PhaseFamilyPotential(
        func=f, sup_bound=float(np.max(vals)), inf_bound=float(np.min(vals)),
        tag="quasi-weak-holder", name=f"phase(t={t:g},{depth_rule})",
        params=params, t=float(t), depth_rule=depth_rule, chain=tuple(chain.tolist()))


# -- variation ----------------------------------------------------------------

def variation_profile(lmap: LorenzMap, phi: Potential, n_max: int,
                      samples: int = DEFAULT_SAMPLES) -> np.ndarray:
    """Sampled V_1, ..., V_{n_max}; entry n-1 holds V_n.

    Only the finest level is sampled.  A depth-n cylinder is the union of its
    depth-n_max descendants, so its sampled oscillation is the spread over
    their samples.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples per cylinder")
    lvl = level(lmap, n_max, samples=samples)
    vals = phi(lvl.samples)
    hi = vals.max(axis=1)
    lo = vals.min(axis=1)
    out = np.empty(n_max)
    for n in range(1, n_max + 1):
        group = lvl.codes >> (n_max - n)
        starts = np.flatnonzero(np.r_[True, group[1:] != group[:-1]])
        out[n - 1] = float(np.max(np.maximum.reduceat(hi, starts) - np.minimum.reduceat(lo, starts)))
    return out


def variation(lmap: LorenzMap, phi: Potential, n: int, samples: int = DEFAULT_SAMPLES) -> float:
    """Sampled lower bound for the largest oscillation over a depth-n cylinder."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return float(variation_profile(lmap, phi, n, samples)[-1])


@dataclass(frozen=True)
class VariationSeries:
    variations: list
    partial_sums: list
    ratio_estimates: list
    verdict: str
    samples: int


def ratio_verdict(ratios: Sequence[float], n_max: int) -> str:
    """Noise-robust ratio test on the final quarter of the ratio sequence.

    Ratios that all sit at or above 1 are also called divergent: the terms
    then do not tend to zero even when their spread is nil.
    """
    r = np.asarray(ratios, dtype=float)
    w = r[-math.ceil(n_max / 4):]
    if not len(w):
        return "inconclusive"
    sigma = float(np.std(w, ddof=1)) if len(w) > 1 else 0.0
    if np.all(w < 1 - 3 * sigma):
        return "summable"
    if np.all(w > 1 + 3 * sigma) or np.all(w >= 1 - RATIO_FLAT_TOL):
        return "divergent"
    return "inconclusive"


def ratios_of(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    prev, nxt = v[:-1], v[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(prev > 0, nxt / np.where(prev > 0, prev, 1.0), np.where(nxt > 0, np.inf, 0.0))
    return r


def variation_series(lmap: LorenzMap, phi: Potential, n_max: int,
                     samples: int = DEFAULT_SAMPLES, profile=None) -> VariationSeries:
    if n_max < 3:
        raise ValueError("n_max must be >= 3")
    v = variation_profile(lmap, phi, n_max, samples) if profile is None else np.asarray(profile)
    partial = np.cumsum(v[1:])
    r = ratios_of(v)
    return VariationSeries(v.tolist(), partial.tolist(), r.tolist(), ratio_verdict(r, n_max), samples)


@dataclass(frozen=True)
class Classification:
    tag: str
    gamma: Optional[float]
    A: Optional[float]
    A_n: Optional[list] = None


def classify_profile(v: Sequence[float]) -> Classification:
    v = np.asarray(v, dtype=float)
    n = np.arange(1, len(v) + 1)
    tail = slice(len(v) // 2, None)
    if np.all(v[tail] <= 1e-14):
        return Classification("weak-holder", 0.0, float(v.max()))
    r = ratios_of(v)[len(v) // 2 - 1:]
    if not np.all(np.isfinite(r)) or np.median(r) >= 0.98:
        return Classification("unknown", None, None)
    pos = v > 0
    slope, icpt = np.polyfit(n[tail][pos[tail]], np.log(v[tail][pos[tail]]), 1)
    gamma = float(math.exp(slope))
    # sub-geometric correction: ratios drifting down toward zero
    drift = np.polyfit(np.arange(len(r)), r, 1)[0] if len(r) > 2 else 0.0
    if r[-1] < 0.8 * r[0] and drift < 0 and np.all(np.diff(r) <= 1e-12 * np.abs(r[1:]) + 1e-15):
        g = float(r[0])
        A_n = (v / g ** n).tolist()
        return Classification("quasi-weak-holder", g, None, A_n)
    A = float(np.max(v[pos] / gamma ** n[pos]))
    return Classification("weak-holder", gamma, A)


def classify(lmap: LorenzMap, phi: Potential, n_max: int,
             samples: int = DEFAULT_SAMPLES) -> Classification:
    """Diagnostic regularity class from the decay of sampled variations."""
    if n_max < 8:
        raise ValueError("n_max must be >= 8")
    return classify_profile(variation_profile(lmap, phi, n_max, samples))
