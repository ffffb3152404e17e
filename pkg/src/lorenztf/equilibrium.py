"""Periodic-orbit measures, boundary-gap test battery and the phase scan."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cylinders import as_subset
from .errors import DepthCapError, LorenzError, PreconditionError
from .lorenz_map import SIDES, LorenzMap, PeriodicOrbit, boundary_periodic_point
from .potentials import Potential, build_bump, phase_family, variation_series
from .pressure import (DIVERGENCE_THRESHOLD, boundary_averages, gap_check, orbit_sum,
                       pressure)

DEFAULT_K_MAX = 12


@dataclass(frozen=True)
class AtomicMeasure:
    """Uniform probability on the points of a periodic orbit."""

    orbit: PeriodicOrbit

    @property
    def atoms(self) -> tuple:
        return self.orbit.orbit

    @property
    def weights(self) -> tuple:
        n = len(self.atoms)
        return (1.0 / n,) * n

    def is_invariant(self, lmap: LorenzMap, tol: float = 1e-9) -> bool:
        pts = np.sort(np.asarray(self.atoms))
        img = []
        for i, x in enumerate(self.atoms):
            side = self.orbit.side if x == lmap.d else None
            img.append(lmap.evaluate(x, side))
        return bool(np.all(np.abs(np.sort(img) - pts) <= tol))


def is_divergent(value: float) -> bool:
    return not math.isfinite(value) or abs(value) > DIVERGENCE_THRESHOLD


def free_energy(lmap: LorenzMap, phi: Potential, mu: AtomicMeasure) -> float:
    """Orbit average of phi; periodic-orbit measures carry no entropy.

    Overflowing or huge averages come back as ``inf`` (flagged divergent).
    """
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            v = orbit_sum(phi, mu.atoms) / len(mu.atoms)
    except (LorenzError, OverflowError, FloatingPointError):
        return math.inf
    return math.inf if is_divergent(v) else v


@dataclass(frozen=True)
class MedCheck:
    lhs: float
    rhs: float
    band: float
    holds: bool


def proposition_med_check(lmap: LorenzMap, phi: Potential, mu: AtomicMeasure, S,
                          n_max: int = 16, samples: int = 3) -> MedCheck:
    """Pressure over S against the free energy of an orbit measure charging S."""
    S = as_subset(lmap, S)
    if not any(S.contains(x) for x in mu.atoms):
        raise PreconditionError("S carries no mass of the orbit measure")
    est = pressure(lmap, phi, S, 1, n_max, samples=samples)
    rhs = free_energy(lmap, phi, mu)
    band = 3 * est.dispersion + 1e-9
    return MedCheck(est.value, rhs, band, bool(est.value >= rhs - band))


# -- boundary-gap battery --------------------------------------------------------

@dataclass(frozen=True)
class BatteryRow:
    k: int
    side: str
    period: int
    point: float
    orbit_average: float
    boundary_limsup: float
    deviation: float
    deviation_bound: float
    shift_error: float
    bump_pressure: float
    bump_sup: float
    a_ok: bool
    b_ok: bool
    c_ok: bool


@dataclass(frozen=True)
class BatteryReport:
    rows: list
    margin: float
    gap_verdict: str
    a: bool
    b: bool
    c: bool
    d: bool

    @property
    def passed(self) -> bool:
        return self.a and self.b and self.c and self.d


def theorem_a_battery(lmap: LorenzMap, phi: Potential, k_max: int = 6, n_max: int = 16,
                      heights=None, samples: int = 3, threads: int = 1,
                      shift_tol: float = 1e-12, pressure_slack: float = 0.02) -> BatteryReport:
    """Numeric checks of the boundary-orbit argument for a continuous potential.

    (a) orbit averages of p_k tend to the boundary limsup on the matching side
        (deviation at most twice the oscillation of phi over the period);
    (b) adding the bump shifts the periodic Birkhoff sum by exactly sum a_j;
    (c) the bump alone has pressure at most sup a_j (plus ``pressure_slack``);
    (d) the boundary gap holds for phi.
    """
    if not phi.continuous:
        raise PreconditionError("battery requires a continuous potential")
    avg = boundary_averages(lmap, phi, max(n_max, 4 * k_max))
    osc = phi.sup_bound - phi.inf_bound
    rows = []
    for side in SIDES:
        # d+ is followed by 0, d- by 1
        target = avg.limsup0 if side == "plus" else avg.limsup1
        for k in range(1, k_max + 1):
            orb = boundary_periodic_point(lmap, k, side)
            N = orb.period
            a_k = orbit_sum(phi, orb.orbit) / N
            dev = abs(a_k - target)
            bound = 2 * osc / N + 1e-9
            bump = build_bump(lmap, orb, heights)
            shifted = orbit_sum(phi + bump, orb.orbit) - orbit_sum(phi, orb.orbit)
            err = abs(shifted - math.fsum(bump.heights))
            bp = pressure(lmap, bump, None, 1, n_max, samples=samples, threads=threads).value
            sup_a = max(bump.heights)
            rows.append(BatteryRow(k, side, N, orb.point, a_k, target, dev, bound, err, bp,
                                   sup_a, dev <= bound, err <= shift_tol,
                                   bp <= sup_a + pressure_slack))
    g = gap_check(lmap, phi, n_max, samples=samples, threads=threads)
    return BatteryReport(rows, g.margin, g.verdict, all(r.a_ok for r in rows),
                         all(r.b_ok for r in rows), all(r.c_ok for r in rows),
                         g.verdict == "gap")


def battery_csv(report: BatteryReport, header_comment: str = "") -> str:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    names = list(BatteryRow.__dataclass_fields__)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for r in report.rows:
        w.writerow([_fmt(getattr(r, n)) for n in names])
    buf.write(f"# margin={report.margin!r} verdict={report.gap_verdict} "
              f"a={report.a} b={report.b} c={report.c} d={report.d}\n")
    return buf.getvalue()


# -- phase scan -----------------------------------------------------------------

REGIMES = ("multiple-equilibria", "no-equilibrium-candidate", "unique-candidate")


@dataclass(frozen=True)
class PhaseScanRow:
    t: float
    variation_verdict: str
    orbit_free_energy: dict
    pressure_estimate: float
    gap_verdict: str
    regime: str
    error: Optional[str] = None


def regime_of(verdict: str, free_energies: Sequence[float], pressure_value: float,
              gap: str) -> str:
    if verdict == "divergent" and any(
            is_divergent(f) or (math.isfinite(pressure_value) and f >= pressure_value)
            for f in free_energies):
        return "multiple-equilibria"
    if verdict == "summable" and gap == "gap":
        return "unique-candidate"
    return "no-equilibrium-candidate"


@dataclass(frozen=True)
class PhaseScan:
    rows: list
    bracket: Optional[tuple]  # where the variation verdict turns summable
    formula_range: tuple
    flips: int
    monotone: bool


def _scan_row(lmap, t, n_max, k_max, depth_rule, orbits, samples, pressure_n_max):
    if t == 0:
        return PhaseScanRow(t, "inconclusive", {}, math.nan, "inconclusive",
                            "no-equilibrium-candidate", error="t = 0 is singular")
    pf = phase_family(lmap, t, depth_rule)
    vs = variation_series(lmap, pf, n_max)
    fe = {key: free_energy(lmap, pf, AtomicMeasure(o)) for key, o in orbits.items()}
    g = gap_check(lmap, pf, pressure_n_max, samples=samples)
    p = math.inf if g.total.diverged else g.total.value
    return PhaseScanRow(t, vs.verdict, fe, p, g.verdict,
                        regime_of(vs.verdict, list(fe.values()), p, g.verdict))


def formula_range(lmap: LorenzMap, n_max: int) -> tuple:
    """Range of lam0/(1 - ln x) for x across the zero-chain cylinders of the ratio window.

    lam0 is the contraction of the chain at its deepest computed step.
    """
    from .potentials import zero_chain

    c = zero_chain(lmap, n_max + 1)
    w = math.ceil(n_max / 4)
    lam0 = c[n_max] / c[n_max - 1]
    lo_x, hi_x = c[n_max], c[n_max - w - 1]
    return (lam0 / (1 - math.log(lo_x)), lam0 / (1 - math.log(hi_x)))


def phase_scan(lmap: LorenzMap, t_grid: Sequence[float], n_max: int = 16,
               k_max: int = DEFAULT_K_MAX, depth_rule: str = "zero-chain",
               samples: int = 3, threads: int = 1,
               pressure_n_max: Optional[int] = None) -> PhaseScan:
    """Variation verdict, orbit free energies, pressure and regime along a t grid."""
    if not len(t_grid):
        raise ValueError("t_grid must be non-empty")
    orbits = {}
    for side in SIDES:
        for k in range(1, k_max + 1):
            try:
                orbits[f"{side}{k}"] = boundary_periodic_point(lmap, k, side)
            except DepthCapError:
                break
    pn = pressure_n_max or n_max

    def run(t):
        return _scan_row(lmap, float(t), n_max, k_max, depth_rule, orbits, samples, pn)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, t_grid))
    else:
        rows = [run(t) for t in t_grid]
    ordered = sorted((r for r in rows if r.error is None), key=lambda r: r.t)
    flips = sum(a.regime != b.regime for a, b in zip(ordered, ordered[1:]))
    seen_unique, monotone = False, True
    for r in ordered:
        if r.regime == "unique-candidate":
            seen_unique = True
        elif seen_unique:
            monotone = False
    return PhaseScan(rows, verdict_bracket(ordered), formula_range(lmap, n_max),
                     flips, monotone)


def verdict_bracket(ordered: Sequence[PhaseScanRow]) -> Optional[tuple]:
    """[last divergent t, first summable t above it] along an increasing grid."""
    div = [i for i, r in enumerate(ordered) if r.variation_verdict == "divergent"]
    if not div:
        return None
    last = div[-1]
    for r in ordered[last + 1:]:
        if r.variation_verdict == "summable":
            return (ordered[last].t, r.t)
    return None


def scan_csv(scan: PhaseScan, header_comment: str = "") -> str:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    keys = list(scan.rows[0].orbit_free_energy) if scan.rows else []
    for r in scan.rows:
        keys += [k for k in r.orbit_free_energy if k not in keys]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "verdict", *[f"fe_{k}" for k in keys], "pressure", "gap", "regime", "error"])
    for r in scan.rows:
        w.writerow([_fmt(r.t), r.variation_verdict,
                    *[_fmt(r.orbit_free_energy.get(k, math.nan)) for k in keys],
                    _fmt(r.pressure_estimate), r.gap_verdict, r.regime, r.error or ""])
    lo, hi = scan.formula_range
    br = "none" if scan.bracket is None else f"[{scan.bracket[0]!r},{scan.bracket[1]!r}]"
    buf.write(f"# critical_bracket={br} formula_range=[{lo!r},{hi!r}] flips={scan.flips} "
              f"monotone={scan.monotone}\n")
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "divergent" if v > 0 else "-divergent"
        return repr(v)
    return v
