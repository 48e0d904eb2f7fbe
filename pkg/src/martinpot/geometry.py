"""Composable open subsets of R^d: balls, half-spaces, thorn domains and
boolean/truncation combinators, with membership, conservative inradius
queries and kappa-fatness witness search.

Distances returned by ``dist_to_complement`` are allowed to undershoot the
true distance by a bounded factor for composite shapes; walk-on-spheres
stays exact with smaller inscribed balls, only slower.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class Profile:
    """Thorn profile f: symbolic tags so the accessibility module can
    evaluate the thorn integrand analytically."""

    def __call__(self, t):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PowerProfile(Profile):
    """f(t) = c * t^beta."""

    beta: float
    coeff: float = 1.0

    def __call__(self, t):
        return self.coeff * np.asarray(t, dtype=float) ** self.beta

    def to_dict(self):
        return {"kind": "power", "beta": self.beta, "coeff": self.coeff}


@dataclass(frozen=True)
class LogPowerProfile(Profile):
    """f(t) = t * |log t|^(-beta), the borderline family for thorn
    accessibility at infinity (t > e) and at a finite tip (t < 1/e)."""

    beta: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return t * np.abs(np.log(t)) ** (-self.beta)

    def to_dict(self):
        return {"kind": "log_power", "beta": self.beta}


@dataclass(frozen=True)
class TableProfile(Profile):
    """Piecewise-linear profile from (t, f) samples."""

    ts: tuple
    fs: tuple

    def __call__(self, t):
        return np.interp(np.asarray(t, dtype=float), self.ts, self.fs)

    def to_dict(self):
        return {"kind": "table", "ts": list(self.ts), "fs": list(self.fs)}


def profile_from_dict(rec: dict) -> Profile:
    kind = rec["kind"]
    if kind == "power":
        return PowerProfile(float(rec["beta"]), float(rec.get("coeff", 1.0)))
    if kind == "log_power":
        return LogPowerProfile(float(rec["beta"]))
    if kind == "table":
        return TableProfile(tuple(rec["ts"]), tuple(rec["fs"]))
    raise ValueError(f"unknown profile kind {kind!r}")


class Domain:
    """Open subset of R^d.  Points are 1-d arrays of length d; the
    vectorized queries accept (n, d) arrays."""

    d: int
    bounded: bool = False

    def contains(self, x) -> np.ndarray | bool:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        out = self._contains(np.atleast_2d(x))
        return bool(out[0]) if single else out

    def dist_to_complement(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        inside = self._contains(pts)
        if not np.all(inside):
            raise ValueError("dist_to_complement requires points inside the domain")
        out = self._dist(pts)
        return float(out[0]) if single else out

    def _contains(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _dist(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class Ball(Domain):
    center: tuple
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def d(self):
        return len(self.center)

    @property
    def bounded(self):
        return True

    def _contains(self, pts):
        return np.linalg.norm(pts - np.asarray(self.center), axis=1) < self.radius

    def _dist(self, pts):
        return self.radius - np.linalg.norm(pts - np.asarray(self.center), axis=1)

    def to_dict(self):
        return {"type": "ball", "center": list(self.center), "r": self.radius}


@dataclass(frozen=True)
class Halfspace(Domain):
    """Open half-space {x : normal . x > offset}."""

    normal: tuple
    offset: float = 0.0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        nn = float(np.linalg.norm(n))
        if nn == 0:
            raise ValueError("normal must be nonzero")
        object.__setattr__(self, "normal", tuple(n / nn))
        object.__setattr__(self, "offset", float(self.offset) / nn)

    @property
    def d(self):
        return len(self.normal)

    def _contains(self, pts):
        return pts @ np.asarray(self.normal) > self.offset

    def _dist(self, pts):
        return pts @ np.asarray(self.normal) - self.offset

    def to_dict(self):
        return {"type": "halfspace", "normal": list(self.normal), "offset": self.offset}


@dataclass(frozen=True)
class Thorn(Domain):
    """Thorn {(y1, yt) : y1 > lo, |yt| < profile(y1)} along the first axis.

    With lo=2 and profile defined on (2, inf) this is the domain whose
    accessibility of infinity is decided by an explicit integral test; with
    lo=0 and a profile on (0, 1) (plus hi=1) it is the finite-point variant.
    """

    profile: Profile
    dim: int
    lo: float = 2.0
    hi: float = math.inf

    @property
    def d(self):
        return self.dim

    @property
    def bounded(self):
        return math.isfinite(self.hi)

    def _contains(self, pts):
        y1 = pts[:, 0]
        yt = np.linalg.norm(pts[:, 1:], axis=1)
        with np.errstate(invalid="ignore"):
            inside = (y1 > self.lo) & (y1 < self.hi)
            f = np.where(inside, self.profile(np.where(inside, y1, self.lo + 1.0)), 0.0)
        return inside & (yt < f)

    def _dist(self, pts):
        # Conservative: distance to the bounding cylinder walls and caps.
        y1 = pts[:, 0]
        yt = np.linalg.norm(pts[:, 1:], axis=1)
        f = self.profile(y1)
        d = np.minimum(f - yt, y1 - self.lo)
        if math.isfinite(self.hi):
            d = np.minimum(d, self.hi - y1)
        # The profile is nondecreasing with f(t) <= t, so the tube ahead of
        # y1 is at least as wide; halve to stay inside the true set.
        return 0.5 * d

    def to_dict(self):
        rec = {"type": "thorn", "profile": self.profile.to_dict(), "d": self.dim}
        if self.lo != 2.0:
            rec["lo"] = self.lo
        if math.isfinite(self.hi):
            rec["hi"] = self.hi
        return rec


@dataclass(frozen=True)
class Intersection(Domain):
    parts: tuple

    @property
    def d(self):
        return self.parts[0].d

    @property
    def bounded(self):
        return any(p.bounded for p in self.parts)

    def _contains(self, pts):
        out = np.ones(len(pts), dtype=bool)
        for p in self.parts:
            out &= p._contains(pts)
        return out

    def _dist(self, pts):
        return np.min([p._dist(pts) for p in self.parts], axis=0)

    def to_dict(self):
        return {"type": "intersection", "parts": [p.to_dict() for p in self.parts]}


@dataclass(frozen=True)
class Union(Domain):
    parts: tuple

    @property
    def d(self):
        return self.parts[0].d

    @property
    def bounded(self):
        return all(p.bounded for p in self.parts)

    def _contains(self, pts):
        out = np.zeros(len(pts), dtype=bool)
        for p in self.parts:
            out |= p._contains(pts)
        return out

    def _dist(self, pts):
        # Lower bound: the best distance within whichever part contains the
        # point (a union can only be larger).
        dists = np.zeros(len(pts))
        for p in self.parts:
            inside = p._contains(pts)
            if np.any(inside):
                d = np.zeros(len(pts))
                d[inside] = p._dist(pts[inside])
                dists = np.maximum(dists, d)
        return dists

    def to_dict(self):
        return {"type": "union", "parts": [p.to_dict() for p in self.parts]}


@dataclass(frozen=True)
class Complement(Domain):
    """Complement of the closure of a leaf shape (open by construction for
    balls and half-spaces)."""

    part: Domain

    @property
    def d(self):
        return self.part.d

    def _contains(self, pts):
        if isinstance(self.part, Complement):
            return self.part.part._contains(pts)
        if isinstance(self.part, Ball):
            c = np.asarray(self.part.center)
            return np.linalg.norm(pts - c, axis=1) > self.part.radius
        if isinstance(self.part, Halfspace):
            return pts @ np.asarray(self.part.normal) < self.part.offset
        return ~self.part._contains(pts)

    def _dist(self, pts):
        if isinstance(self.part, Complement):
            return self.part.part._dist(pts)
        if isinstance(self.part, Ball):
            c = np.asarray(self.part.center)
            return np.linalg.norm(pts - c, axis=1) - self.part.radius
        if isinstance(self.part, Halfspace):
            return self.part.offset - pts @ np.asarray(self.part.normal)
        raise NotImplementedError(
            "dist_to_complement for complements of composite shapes"
        )

    def to_dict(self):
        return {"type": "complement", "part": self.part.to_dict()}


def truncate_inside(domain: Domain, center, radius: float) -> Domain:
    """D_p = D intersected with the open ball B(center, radius)."""
    return Intersection((domain, Ball(tuple(center), radius)))


def truncate_outside(domain: Domain, center, radius: float) -> Domain:
    """D^p = D intersected with the complement of the closed ball."""
    return Intersection((domain, Complement(Ball(tuple(center), radius))))


def annulus_part(domain: Domain, center, p: float, q: float) -> Domain:
    """D^{p,q} = D restricted to the open annulus q < |x - center| < p."""
    if not p > q > 0:
        raise ValueError("need p > q > 0")
    return truncate_inside(truncate_outside(domain, center, q), center, p)


def domain_from_dict(rec: dict) -> Domain:
    t = rec["type"]
    if t == "ball":
        return Ball(tuple(rec["center"]), float(rec["r"]))
    if t == "halfspace":
        return Halfspace(tuple(rec["normal"]), float(rec.get("offset", 0.0)))
    if t == "thorn":
        return Thorn(
            profile_from_dict(rec["profile"]),
            int(rec["d"]),
            lo=float(rec.get("lo", 2.0)),
            hi=float(rec.get("hi", math.inf)),
        )
    if t == "intersection":
        return Intersection(tuple(domain_from_dict(p) for p in rec["parts"]))
    if t == "union":
        return Union(tuple(domain_from_dict(p) for p in rec["parts"]))
    if t == "complement":
        return Complement(domain_from_dict(rec["part"]))
    raise ValueError(f"unknown domain type {t!r}")


def domain_from_json(text: str) -> Domain:
    return domain_from_dict(json.loads(text))


@dataclass
class FatnessReport:
    kappa: float
    radii: list
    witnesses: list  # per radius: witness center or None
    fat: bool = False
    at_infinity: bool = False


def _witness_search(domain, z0, kappa, r, at_infinity, rng):
    """Grid-plus-refinement search for A_r with B(A_r, kappa*r) inside the
    required region.  Semi-decision: may miss a witness, never fabricates
    one (candidates are certified through dist_to_complement)."""
    z0 = np.asarray(z0, dtype=float)
    d = domain.d
    if at_infinity:
        region = truncate_outside(domain, z0, r)
        lo, hi = r, r / kappa
    else:
        region = truncate_inside(domain, z0, r)
        lo, hi = 0.0, r

    # Candidate centers: random points in the shell/ball around z0.
    n = 4096
    dirs = rng.standard_normal((n, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = lo + (hi - lo) * rng.random(n)
    cand = z0 + dirs * radii[:, None]
    inside = region.contains(cand)
    cand = cand[inside]
    if len(cand) == 0:
        return None
    dist = region.dist_to_complement(cand)
    if at_infinity:
        dist = np.minimum(dist, (r / kappa) - np.linalg.norm(cand - z0, axis=1))
    best = int(np.argmax(dist))
    if dist[best] >= kappa * r:
        return cand[best]
    return None


def kappa_fat_at(domain: Domain, z0, kappa: float, radii, seed: int = 0) -> FatnessReport:
    """Search for kappa-fatness witnesses at a finite boundary point."""
    if not (0.0 < kappa <= 0.5):
        raise ValueError("kappa must be in (0, 1/2]")
    rng = np.random.default_rng(seed)
    witnesses = [_witness_search(domain, z0, kappa, r, False, rng) for r in radii]
    return FatnessReport(
        kappa=kappa,
        radii=list(radii),
        witnesses=witnesses,
        fat=all(w is not None for w in witnesses),
    )


def kappa_fat_at_infinity(domain: Domain, kappa: float, radii, seed: int = 0) -> FatnessReport:
    """Search for kappa-fatness witnesses at infinity (origin-centered)."""
    if not (0.0 < kappa <= 0.5):
        raise ValueError("kappa must be in (0, 1/2]")
    rng = np.random.default_rng(seed)
    z0 = np.zeros(domain.d)
    witnesses = [_witness_search(domain, z0, kappa, r, True, rng) for r in radii]
    return FatnessReport(
        kappa=kappa,
        radii=list(radii),
        witnesses=witnesses,
        fat=all(w is not None for w in witnesses),
        at_infinity=True,
    )
