"""Run configuration: an INI file with [map], [potential], [run] and [output]."""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import potentials as pot
from .cylinders import Subset
from .errors import LorenzError
from .lorenz_map import LorenzMap, affine, boundary_periodic_point, doubling

DEFAULTS = {
    "map": {"kind": "doubling"},
    "potential": {"kind": "constant", "value": "0"},
    "run": {"n_max": "16", "n_min": "1", "depth": "5", "samples": "3", "subset": "full",
            "k_max": "10", "sides": "plus,minus", "t_grid": "logspace:-3,1,64",
            "method": "tail-slope", "seed": "0", "grid_size": "1024"},
    "output": {"dir": "", "json": "false"},
}


class ConfigError(LorenzError):
    """Malformed or inconsistent configuration."""


@dataclass
class RunConfig:
    sections: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: Optional[str] = None, text: Optional[str] = None) -> "RunConfig":
        cp = configparser.ConfigParser()
        cp.read_dict(DEFAULTS)
        try:
            if path:
                with open(path) as fh:
                    cp.read_file(fh)
            if text:
                cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        unknown = set(cp.sections()) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        return cls({s: dict(cp[s]) for s in cp.sections()})

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def set(self, section: str, key: str, value):
        self.sections.setdefault(section, {})[key] = str(value)

    def num(self, section: str, key: str, default=None, kind=float):
        raw = self.get(section, key)
        if raw is None or raw == "":
            if default is None:
                raise ConfigError(f"missing [{section}] {key}")
            return default
        try:
            return kind(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}={raw!r} is not a valid {kind.__name__}") from exc

    def digest(self, exclude=(("run", "threads"), ("output", "dir"), ("output", "json"))) -> str:
        """sha256 of the resolved settings that influence results."""
        clean = {s: {k: v for k, v in kv.items() if (s, k) not in exclude}
                 for s, kv in sorted(self.sections.items())}
        return hashlib.sha256(json.dumps(clean, sort_keys=True).encode()).hexdigest()

    # -- resolution -----------------------------------------------------------

    def build_map(self) -> LorenzMap:
        kind = self.get("map", "kind", "doubling")
        kw = {}
        if self.get("map", "depth_cap"):
            kw["depth_cap"] = self.num("map", "depth_cap", kind=int)
        if self.get("map", "tol_d"):
            kw["tol_d"] = self.num("map", "tol_d")
        if kind == "doubling":
            return doubling(**kw)
        if kind == "affine":
            return affine(self.num("map", "d"), self.num("map", "y0"), self.num("map", "y1"), **kw)
        raise ConfigError(f"unknown map kind {kind!r}")

    def build_potential(self, lmap: LorenzMap, t: Optional[float] = None) -> pot.Potential:
        g = lambda k, default=None, kind=float: self.num("potential", k, default, kind)  # noqa: E731
        kind = self.get("potential", "kind", "constant")
        if kind == "constant":
            return pot.constant(g("value", 0.0))
        if kind == "identity":
            return pot.identity()
        if kind == "log_slope":
            return pot.scaled_log_slope(g("t", 1.0), g("slope", 2.0))
        if kind == "holder":
            return pot.holder(g("alpha"), g("K", 1.0), g("center", 0.5))
        if kind == "planted":
            return pot.planted_weak_holder(g("gamma"), g("A", 1.0), g("lam", 0.5))
        if kind == "step":
            return pot.step(g("at"), g("height", 1.0))
        if kind == "sin_like":
            return pot.sin_like(g("knots", 65, int), g("amplitude", 0.5))
        if kind == "tabulated":
            at_d = None
            if self.get("potential", "at_d"):
                at_d = tuple(float(v) for v in self.get("potential", "at_d").split(","))
            return pot.load_tabulated(self.get("potential", "path"), at_d=at_d, d=lmap.d)
        if kind == "phase_family":
            return pot.phase_family(lmap, g("t") if t is None else t,
                                    self.get("potential", "depth_rule", "zero-chain"),
                                    g("n", 1, int))
        if kind in ("bump", "eps_bump"):
            side, _, k = self.get("potential", "orbit", "minus:1").partition(":")
            orb = boundary_periodic_point(lmap, int(k or 1), side)
            delta = g("delta", 0.0) or None
            if kind == "eps_bump":
                return pot.build_eps_bump(lmap, orb, g("eps"), delta)
            return pot.build_bump(lmap, orb, None, delta)
        raise ConfigError(f"unknown potential kind {kind!r}")

    def subset(self, lmap: LorenzMap) -> Subset:
        raw = self.get("run", "subset", "full")
        kind, _, rest = raw.partition(":")
        if kind == "full":
            return Subset.full()
        if kind == "boundary":
            return Subset.boundary(lmap)
        if kind == "empty":
            return Subset.of_points([], label="empty")
        vals = [float(v) for v in rest.split(",") if v.strip()]
        if kind == "points":
            return Subset.of_points(vals)
        if kind == "interval" and len(vals) == 2:
            return Subset.interval(*vals)
        raise ConfigError(f"bad subset {raw!r}")

    def sides(self) -> list[str]:
        sides = [s.strip() for s in self.get("run", "sides", "plus,minus").split(",") if s.strip()]
        if any(s not in ("plus", "minus") for s in sides):
            raise ConfigError(f"bad sides {sides}")
        return sides

    def t_grid(self) -> list[float]:
        raw = self.get("run", "t_grid")
        if raw.startswith("logspace:"):
            a, b, n = raw.split(":", 1)[1].split(",")
            return np.logspace(float(a), float(b), int(n)).tolist()
        return [float(v) for v in raw.split(",") if v.strip()]
