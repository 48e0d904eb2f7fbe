"""Accessibility criteria: thorn integral tests with analytic integrands,
numerical divergence classification of partial integrals, and the
Monte-Carlo criteria for accessibility of a finite boundary point and of
infinity.

Numerical divergence testing is undecidable in general; every verdict here
is three-way, with explicit "inconclusive" for the gray zone, and the
acceptance anchors only use parameter points where the answer is proved
with margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .closed_forms import _sphere_area
from .geometry import (
    Domain,
    LogPowerProfile,
    PowerProfile,
    Profile,
    truncate_inside,
    truncate_outside,
)
from .process import ProcessSpec
from .simulation import (
    estimate_exit_time,
    estimate_poisson_kernel,
    growth_weights_by_annulus,
)

# Geometric truncation schedule (in the log-transformed variable) for the
# thorn tests: ratio 6 per level, 9 partial integrals.
_THORN_RATIO = 6.0
_THORN_LEVELS = 9


@dataclass
class DivergenceReport:
    integrand_tag: str
    truncations: list
    partials: list
    growth_exponent: float
    verdict: str  # "divergent" | "convergent" | "inconclusive"


@dataclass
class AccessVerdict:
    target: str  # "finite" | "infinity"
    verdict: str  # "accessible" | "inaccessible" | "inconclusive"
    evidence: dict = field(default_factory=dict)
    method: str = ""


def classify(partials) -> str:
    """Classify increasing partial integrals at geometric truncations.

    Divergent: increments stay bounded below (no decaying trend).
    Convergent: increments decay geometrically with a negligible tail.
    Anything in between is inconclusive by design.
    """
    partials = np.asarray(partials, dtype=float)
    if len(partials) < 4:
        raise ValueError("need at least 4 truncation levels")
    if np.any(np.diff(partials) < -1e-12 * np.abs(partials[-1])):
        raise ValueError("partials must be nondecreasing")
    inc = np.diff(partials)
    total = partials[-1]
    if total <= 0:
        return "convergent"
    if inc[-1] <= 1e-12 * total:
        return "convergent"
    ratios = inc[1:] / inc[:-1]
    rmax = float(ratios.max())
    if rmax <= 0.7:
        tail = inc[-1] * rmax / (1.0 - rmax)
        if tail < 0.5 * total:
            return "convergent"
    if inc[-1] >= 0.5 * inc[0] and np.all(inc >= 1e-3 * inc[0]):
        return "divergent"
    return "inconclusive"


def _fitted_growth_exponent(truncations, partials) -> float:
    """Slope of log(increment) against level index; > 0 means growth."""
    inc = np.diff(np.asarray(partials, dtype=float))
    pos = inc > 0
    if pos.sum() < 2:
        return -math.inf
    lev = np.arange(len(inc), dtype=float)[pos]
    slope = np.polyfit(lev, np.log(inc[pos]), 1)[0]
    return float(slope)


def _thorn_log_integrand(spec: ProcessSpec, profile: Profile, finite: bool):
    """Integrand of the thorn test in the variable u = |log t|, evaluated in
    log space so that arbitrarily deep truncations stay finite.

    For a stable process the t-integrand times t collapses to
    (f(t)/t)^(alpha + d - 1); symbolic profiles supply log(f(t)/t) exactly.
    """
    d = spec.d
    if spec.is_stable:
        power = spec.alpha + d - 1.0
        if isinstance(profile, LogPowerProfile):
            beta = profile.beta

            def g(u):
                return np.exp(-power * beta * np.log(u))

            return g
        if isinstance(profile, PowerProfile):
            lc = math.log(profile.coeff)
            slope = profile.beta - 1.0

            def g(u):
                logt = -u if finite else u
                return np.exp(power * (lc + slope * logt))

            return g

    # Generic fallback: direct evaluation, valid while exp(u) is finite.
    def g(u):
        t = np.exp(-u) if finite else np.exp(u)
        f = profile(t)
        return spec.psi0(1.0 / t) / spec.psi0(1.0 / f) * f ** (d - 1) / t ** (d - 1)

    return g


def _check_profile(profile: Profile, ts) -> None:
    f = np.asarray(profile(ts), dtype=float)
    if np.any(f <= 0):
        raise ValueError("profile must be positive")
    if np.any(np.diff(f) < -1e-12):
        raise ValueError("profile must be nondecreasing")
    if np.any(f > np.asarray(ts) * (1.0 + 1e-12)):
        raise ValueError("profile must satisfy f(t) <= t")


def _thorn_report(spec, profile, finite: bool, u0: float) -> DivergenceReport:
    g = _thorn_log_integrand(spec, profile, finite)
    trunc = [u0 * _THORN_RATIO**k for k in range(_THORN_LEVELS + 1)]
    partials = []
    total = 0.0
    for a, b in zip(trunc, trunc[1:]):
        val, _ = integrate.quad(g, a, b, epsrel=1e-10, epsabs=0.0, limit=400)
        total += val
        partials.append(total)
    tag = ("finite-" if finite else "infinity-") + type(profile).__name__
    return DivergenceReport(
        integrand_tag=tag,
        truncations=trunc[1:],
        partials=partials,
        growth_exponent=_fitted_growth_exponent(trunc[1:], partials),
        verdict=classify(partials),
    )


def thorn_infinity_test(spec: ProcessSpec, profile: Profile, t0: float = 4.0) -> DivergenceReport:
    """Integral test for accessibility of infinity from the thorn domain
    {y1 > 2, |y~| < f(y1)}: divergent partial integrals mean accessible."""
    _check_profile(profile, np.geomspace(max(t0, 4.0), 1e6, 64))
    return _thorn_report(spec, profile, finite=False, u0=math.log(t0))


def thorn_finite_test(spec: ProcessSpec, profile: Profile, t0: float = 0.3) -> DivergenceReport:
    """Integral test for accessibility of the tip of the finite thorn
    {0 < x1 < 1, |x~| < f(x1)}: truncations shrink geometrically toward 0."""
    _check_profile(profile, np.geomspace(1e-6, min(t0, 0.3), 64))
    return _thorn_report(spec, profile, finite=True, u0=math.log(1.0 / t0))


def locate_thorn_flip(
    spec: ProcessSpec,
    profile_for_beta,
    lo: float,
    hi: float,
    finite: bool = False,
    tol: float = 0.02,
) -> tuple[float, float]:
    """Bisect on beta for the first non-divergent verdict; returns the
    bracketing (last divergent, first non-divergent) pair."""
    test = thorn_finite_test if finite else thorn_infinity_test
    v_lo = test(spec, profile_for_beta(lo)).verdict
    v_hi = test(spec, profile_for_beta(hi)).verdict
    if v_lo != "divergent" or v_hi == "divergent":
        raise ValueError("bracket does not straddle the verdict flip")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if test(spec, profile_for_beta(mid)).verdict == "divergent":
            lo = mid
        else:
            hi = mid
    return lo, hi


def _uniform_shell(rng, z0, r_in, r_out, d, n):
    dirs = rng.standard_normal((n, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = (r_in**d + (r_out**d - r_in**d) * rng.random(n)) ** (1.0 / d)
    return np.asarray(z0) + dirs * radii[:, None]


def _shell_volume(r_in, r_out, d):
    return _sphere_area(d) / d * (r_out**d - r_in**d)


def finite_point_test(
    spec: ProcessSpec,
    domain: Domain,
    z0,
    mc_n: int = 200,
    pts_per_shell: int = 48,
    n_shells: int = 7,
    seed: int = 0,
) -> AccessVerdict:
    """Monte-Carlo version of the finite-point criterion: the boundary point
    is inaccessible iff the exit-time-weighted Levy mass of the unit
    truncation is finite.  Shells shrink geometrically toward z0."""
    z0 = np.asarray(z0, dtype=float)
    if domain.contains(z0):
        raise ValueError("z0 must lie on the boundary, not inside the domain")
    d1 = truncate_inside(domain, z0, 1.0)
    rng = np.random.default_rng(seed)
    partials = []
    total = 0.0
    shells = [(2.0 ** (-k - 1), 2.0**-k) for k in range(n_shells)]
    for k, (r_in, r_out) in enumerate(shells):
        pts = _uniform_shell(rng, z0, r_in, r_out, spec.d, pts_per_shell)
        inside = d1.contains(pts)
        vals = np.zeros(pts_per_shell)
        for i in np.flatnonzero(inside):
            est = estimate_exit_time(
                spec, d1, pts[i], mc_n, seed=seed * 131 + k * 17 + int(i) + 1
            )
            vals[i] = est.value * float(
                spec.levy_density(float(np.linalg.norm(pts[i] - z0)))
            )
        total += _shell_volume(r_in, r_out, spec.d) * float(vals.mean())
        partials.append(total)
    verdict_map = {
        "divergent": "accessible",
        "convergent": "inaccessible",
        "inconclusive": "inconclusive",
    }
    cls = classify(partials)
    return AccessVerdict(
        target="finite",
        verdict=verdict_map[cls],
        evidence={"partials": partials, "classification": cls},
        method="shell-MC exit-time Levy mass",
    )


def infinity_test(
    spec: ProcessSpec,
    domain: Domain,
    mc_n: int = 200,
    pts_per_annulus: int = 32,
    n_annuli: int = 6,
    seed: int = 0,
) -> AccessVerdict:
    """Monte-Carlo version of the criterion at infinity: infinity is
    inaccessible iff the Poisson-kernel mass of the unit-exterior truncation
    at the origin is finite.  Annuli expand geometrically."""
    if domain.bounded:
        raise ValueError("infinity test requires an unbounded domain")
    origin = np.zeros(spec.d)
    dext = truncate_outside(domain, origin, 1.0)
    rng = np.random.default_rng(seed)
    partials = []
    total = 0.0
    for k in range(n_annuli):
        r_in, r_out = 2.0**k, 2.0 ** (k + 1)
        pts = _uniform_shell(rng, origin, r_in, r_out, spec.d, pts_per_annulus)
        inside = dext.contains(pts)
        vals = np.zeros(pts_per_annulus)
        for i in np.flatnonzero(inside):
            est = estimate_poisson_kernel(
                spec, dext, pts[i], origin, mc_n,
                seed=seed * 131 + k * 17 + int(i) + 1,
            )
            vals[i] = est.value
        total += _shell_volume(r_in, r_out, spec.d) * float(vals.mean())
        partials.append(total)
    verdict_map = {
        "divergent": "accessible",
        "convergent": "inaccessible",
        "inconclusive": "inconclusive",
    }
    cls = classify(partials)
    return AccessVerdict(
        target="infinity",
        verdict=verdict_map[cls],
        evidence={"partials": partials, "classification": cls},
        method="annulus-MC Poisson-kernel mass",
    )


def growth_probe(
    spec: ProcessSpec,
    domain: Domain,
    x0,
    radius_schedule,
    mc_n: int,
    seed: int = 0,
    workers: int = 1,
    max_steps: int = 10_000,
) -> DivergenceReport:
    """Cumulative Green mass of expanding annuli around the origin, measured
    by attributing walk-on-spheres ball weights to annuli.  Unbounded growth
    signals that infinity is accessible."""
    edges = np.asarray(radius_schedule, dtype=float)
    center = np.zeros(spec.d)
    means, _, trunc_frac = growth_weights_by_annulus(
        spec, domain, x0, center, edges, mc_n, seed,
        workers=workers, max_steps=max_steps,
    )
    if np.any(means < 0):
        raise AssertionError("annulus masses must be nonnegative")
    partials = np.cumsum(means).tolist()
    return DivergenceReport(
        integrand_tag="green-annulus-mass",
        truncations=edges[1:].tolist(),
        partials=partials,
        growth_exponent=_fitted_growth_exponent(edges[1:], partials),
        verdict=classify(partials) if len(partials) >= 4 else "inconclusive",
    )
