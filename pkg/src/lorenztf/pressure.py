"""Birkhoff sums, partition functions and pressure estimates."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from .cylinders import Subset, as_subset, check_depth, stream_level
from .errors import ConvergenceError, PreconditionError
from .lorenz_map import LEFT, RIGHT, LorenzMap
from .potentials import Potential

#: sample points per cylinder used for the sup of exp(S_n phi)
SUP_SAMPLES = 3
DIVERGENCE_THRESHOLD = 1e12
METHODS = ("tail-slope", "last-term", "aitken")
#: tail dispersion below which two matching estimates count as resolved
RESOLVED_DISPERSION = 1e-3


def birkhoff_sum(lmap: LorenzMap, phi: Potential, x: float, n: int,
                 side0: Optional[str] = None) -> float:
    """phi(x) + phi(l(x)) + ... + phi(l^{n-1}(x)) with one-sided values at d."""
    pts = lmap.orbit_sides(x, n, side0, "propagate" if side0 else None)
    return math.fsum(phi.value(p, s) for p, s in pts)


def orbit_sum(phi: Potential, points: Sequence[float]) -> float:
    return math.fsum(float(v) for v in phi(np.asarray(points, dtype=float)))


# -- log-sum-exp accumulation ---------------------------------------------------

@dataclass(frozen=True)
class LSE:
    """Partial log-sum-exp: total = exp(top) * scaled, over ``count`` terms."""

    top: float = -math.inf
    scaled: float = 0.0
    count: int = 0

    @classmethod
    def of(cls, values: np.ndarray) -> "LSE":
        if not len(values):
            return cls()
        top = float(np.max(values))
        if not math.isfinite(top):
            return cls(top, 1.0, len(values))
        return cls(top, float(np.sum(np.exp(values - top))), len(values))

    def merge(self, other: "LSE") -> "LSE":
        if not other.count:
            return self
        if not self.count:
            return other
        if not math.isfinite(self.top) or not math.isfinite(other.top):
            return LSE(max(self.top, other.top), 1.0, self.count + other.count)
        top = max(self.top, other.top)
        return LSE(top, self.scaled * math.exp(self.top - top) + other.scaled * math.exp(other.top - top),
                   self.count + other.count)

    @property
    def log(self) -> float:
        if not self.count:
            return -math.inf
        if not math.isfinite(self.top):
            return self.top
        return self.top + math.log(self.scaled)


def log_partition_many(lmap: LorenzMap, phi: Potential, n: int, subsets: Sequence[Subset],
                       samples: int = SUP_SAMPLES, threads: int = 1) -> list[LSE]:
    """log Z_n(phi, S) for several subsets in one pass over the depth-n cylinders."""
    check_depth(lmap, n)

    def visit(blk):
        if not len(blk):
            return [LSE() for _ in subsets]
        sup = blk.sums.max(axis=1)
        return [LSE.of(sup[S.mask(blk.lo, blk.hi)]) for S in subsets]

    accs = [LSE() for _ in subsets]
    for parts in stream_level(lmap, n, phi, samples, threads=threads, visitor=visit):
        accs = [a.merge(p) for a, p in zip(accs, parts)]
    return accs


def partition_function(lmap: LorenzMap, phi: Potential, n: int, S=None,
                       samples: int = SUP_SAMPLES, threads: int = 1) -> float:
    """log of the sum over cylinders touching S of the sampled sup of exp(S_n phi)."""
    S = as_subset(lmap, S)
    return log_partition_many(lmap, phi, n, [S], samples, threads)[0].log


# -- extrapolation ----------------------------------------------------------------

def tail_window(length: int) -> int:
    return min(length, max(3, math.ceil(length / 3)))


def extrapolate(ns: Sequence[int], log_z: Sequence[float], method: str = "tail-slope") -> float:
    ns = np.asarray(ns, dtype=float)
    lz = np.asarray(log_z, dtype=float)
    if method == "last-term":
        return float(lz[-1] / ns[-1])
    if method == "aitken":
        a = lz / ns
        x0, x1, x2 = a[-3], a[-2], a[-1]
        den = x2 - 2 * x1 + x0
        if abs(den) < 1e-14:
            return float(x2)
        return float(x2 - (x2 - x1) ** 2 / den)
    if method == "tail-slope":
        w = tail_window(len(ns))
        return float(np.polyfit(ns[-w:], lz[-w:], 1)[0])
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def tail_dispersion(log_z: Sequence[float]) -> float:
    """Sample spread of the increments log Z_n - log Z_{n-1} over the tail window."""
    inc = np.diff(np.asarray(log_z, dtype=float))
    w = inc[-tail_window(len(inc)):]
    return float(np.std(w, ddof=1)) if len(w) > 1 else 0.0


@dataclass(frozen=True)
class PressureEstimate:
    sequence: list
    value: float
    method: str
    cylinder_counts: list
    subset: str
    sup_used: int
    log_z: list = field(default_factory=list)
    diverged: bool = False
    growth: Optional[float] = None
    dispersion: float = 0.0

    def to_csv(self, header_comment: str = "") -> str:
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "cylinders_touching", "log_Zn", "avg"])
        for (n, avg), c, lz in zip(self.sequence, self.cylinder_counts, self.log_z):
            w.writerow([n, c, repr(lz), repr(avg)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"subset": self.subset, "method": self.method, "value": self.value,
                "sup_used": self.sup_used, "diverged": self.diverged, "growth": self.growth,
                "dispersion": self.dispersion,
                "rows": [{"n": n, "cylinders_touching": c, "log_Zn": lz, "avg": a}
                         for (n, a), c, lz in zip(self.sequence, self.cylinder_counts, self.log_z)]}


def _estimate(ns, accs, S, method, samples) -> PressureEstimate:
    log_z = [a.log for a in accs]
    seq = [(n, lz / n) for n, lz in zip(ns, log_z)]
    counts = [a.count for a in accs]
    finite = all(math.isfinite(v) for v in log_z)
    growth = None
    if finite and not any(abs(a) > DIVERGENCE_THRESHOLD for _, a in seq):
        value = extrapolate(ns, log_z, method)
        diverged = False
    else:
        value, diverged = math.inf, True
        ok = [(n, v) for n, v in zip(ns, log_z) if math.isfinite(v)]
        growth = ok[-1][1] / ok[-1][0] if ok else None
    disp = tail_dispersion(log_z) if finite else math.inf
    return PressureEstimate(seq, value, method, counts, S.label, samples, log_z,
                            diverged, growth, disp)


def pressure_many(lmap: LorenzMap, phi: Potential, subsets: Sequence, n_min: int = 1,
                  n_max: int = 16, method: str = "tail-slope", samples: int = SUP_SAMPLES,
                  threads: int = 1) -> list[PressureEstimate]:
    subsets = [as_subset(lmap, S) for S in subsets]
    if n_max - n_min < 3:
        raise ValueError("need n_max - n_min >= 3")
    check_depth(lmap, n_max)
    ns = list(range(max(1, n_min), n_max + 1))
    per_n = [log_partition_many(lmap, phi, n, subsets, samples, threads) for n in ns]
    return [_estimate(ns, [row[i] for row in per_n], S, method, samples)
            for i, S in enumerate(subsets)]


def pressure(lmap: LorenzMap, phi: Potential, S=None, n_min: int = 1, n_max: int = 16,
             method: str = "tail-slope", samples: int = SUP_SAMPLES,
             threads: int = 1) -> PressureEstimate:
    """Finite-n pressure sequence of phi over S with an extrapolated value."""
    return pressure_many(lmap, phi, [S], n_min, n_max, method, samples, threads)[0]


# -- boundary quantities ------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryAverages:
    seq0: list
    seq1: list
    limsup0: float
    limsup1: float
    M: float
    preperiod_hit: Optional[int] = None
    preperiod_hit1: Optional[int] = None


def _averages(lmap, phi, x, n_max):
    """Running averages along the orbit of x, stopping if it lands on d."""
    seq, total, cur = [], 0.0, x
    for n in range(1, n_max + 1):
        total += phi.value(cur)
        seq.append((n, total / n))
        if n == n_max:
            break
        cur = lmap.evaluate(cur)
        if abs(cur - lmap.d) <= lmap.tol_d:
            return seq, n
    return seq, None


def _limsup(seq, hit):
    if hit is not None:
        return seq[-1][1]
    vals = [v for _, v in seq]
    return max(vals[-math.ceil(len(vals) / 3):])


def boundary_averages(lmap: LorenzMap, phi: Potential, n_max: int) -> BoundaryAverages:
    """Birkhoff averages along the orbits of 0 and 1 and their tail maxima.

    If an orbit lands on d after n0 steps the average over those n0 points is
    reported as its limit and n0 is recorded.
    """
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    seq0, hit0 = _averages(lmap, phi, 0.0, n_max)
    seq1, hit1 = _averages(lmap, phi, 1.0, n_max)
    l0, l1 = _limsup(seq0, hit0), _limsup(seq1, hit1)
    return BoundaryAverages(seq0, seq1, l0, l1, max(l0, l1), hit0, hit1)


@dataclass(frozen=True)
class GapCheck:
    boundary: PressureEstimate
    total: PressureEstimate
    margin: float
    dispersion: float
    verdict: str


def gap_verdict(margin: float, dispersion: float) -> str:
    if not math.isfinite(margin):
        return "inconclusive"
    if margin > 3 * dispersion:
        return "gap"
    if dispersion <= RESOLVED_DISPERSION:
        return "no-gap"
    return "inconclusive"


def gap_check(lmap: LorenzMap, phi: Potential, n_max: int = 16, n_min: int = 1,
              samples: int = SUP_SAMPLES, threads: int = 1,
              method: str = "tail-slope") -> GapCheck:
    """Compare boundary pressure with total pressure."""
    total, bdry = pressure_many(lmap, phi, [Subset.full(), Subset.boundary(lmap)],
                                n_min, n_max, method, samples, threads)
    margin = total.value - bdry.value if not (total.diverged or bdry.diverged) else math.nan
    disp = math.hypot(total.dispersion, bdry.dispersion) + 1e-9
    return GapCheck(bdry, total, margin, disp, gap_verdict(margin, disp))


@dataclass(frozen=True)
class PropPartial:
    M: float
    boundary: float
    C_bound: float
    C_series: list
    holds: bool


def prop_partial_check(lmap: LorenzMap, phi: Potential, n_max: int = 16,
                       samples: int = SUP_SAMPLES, threads: int = 1,
                       slack: float = 1e-8) -> PropPartial:
    """Discrepancy between boundary pressure and the boundary orbit averages.

    The discrepancy is tracked for estimates ending at each n of the tail
    window; ``holds`` asks for a non-increasing trend.
    """
    avg = boundary_averages(lmap, phi, n_max)
    est = pressure(lmap, phi, Subset.boundary(lmap), 1, n_max, samples=samples, threads=threads)
    ns = [n for n, _ in est.sequence]
    w = tail_window(len(ns))
    series = []
    for end in range(len(ns) - w, len(ns)):
        v = extrapolate(ns[:end + 1], est.log_z[:end + 1])
        series.append(abs(v - avg.M))
    holds = all(b <= a + slack for a, b in zip(series, series[1:]))
    return PropPartial(avg.M, est.value, series[-1], series, holds)


# -- transfer operator cross-check ----------------------------------------------

def transfer_matrix(lmap: LorenzMap, phi: Potential, grid_size: int) -> sparse.csr_matrix:
    """Ulam-type discretization of f -> sum over preimages y of e^{phi(y)} f(y)."""
    G = grid_size
    edges = np.linspace(0.0, 1.0, G + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    rows, cols, vals = [], [], []
    for sym in (LEFT, RIGHT):
        a, b = lmap.image(sym)
        overlap = (np.minimum(edges[1:], b) - np.maximum(edges[:-1], a)) * G
        j = np.flatnonzero(overlap > 0)
        y = np.asarray(lmap.inverse(np.clip(mids[j], a, b), sym), dtype=float)
        i = np.minimum((y * G).astype(int), G - 1)
        rows.append(j)
        cols.append(i)
        vals.append(np.exp(phi(y)) * np.minimum(overlap[j], 1.0))
    return sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(G, G))


def transfer_pressure_oracle(lmap: LorenzMap, phi: Potential, grid_size: int = 1024,
                             tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """log of the leading eigenvalue of the discretized transfer operator."""
    if grid_size < 64:
        raise PreconditionError("grid_size must be >= 64")
    M = transfer_matrix(lmap, phi, grid_size)
    v = np.full(grid_size, 1.0 / grid_size)
    rho = 0.0
    for _ in range(max_iter):
        w = M @ v
        s = w.sum()
        if not s > 0:
            raise ConvergenceError("transfer operator annihilated the iterate")
        new = s / v.sum()
        v = w / s
        if rho and abs(new - rho) <= tol * abs(new):
            return math.log(new)
        rho = new
    raise ConvergenceError("power iteration did not converge", residual=abs(new - rho))
