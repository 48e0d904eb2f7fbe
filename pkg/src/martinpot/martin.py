"""Martin-kernel estimation by Green-function ratios, oscillation-range
diagnostics, the explicit contraction schedule behind the oscillation
reduction, approximate-factorization residuals and mean-value harmonicity
checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .geometry import Domain
from .process import ProcessSpec
from .simulation import (
    Estimate,
    estimate_exit_time,
    exit_samples,
    green_samples_multi,
)


def oscillation_range(values) -> float:
    """sup/inf of a positive function sampled on a grid; always >= 1."""
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        raise ValueError("empty value list")
    if np.any(vals <= 0):
        raise ValueError("oscillation range requires positive values")
    return float(vals.max() / vals.min())


@dataclass
class Schedule:
    """Explicit constants of the oscillation-reduction contraction: the
    affine map phi(t) = 1 + eta/2 + C/(C+1)(t-1) iterated l times pulls the
    oscillation ratio below 1 + eta(C+1); epsilon and k quantify one
    contraction stage; n = l*k stages are needed in total."""

    eta: float
    C: float
    l: int
    epsilon: float
    k: int
    n: int
    fixed_point: float
    radius_multipliers: list = field(default_factory=list)


def _phi(t, eta, C):
    return 1.0 + eta / 2.0 + C / (C + 1.0) * (t - 1.0)


def _epsilon_ok(eps, eta, C):
    if (C * eps + 1.0 + eps) ** 2 * (1.0 + eps) ** 2 >= 1.0 + eta:
        return False
    # The affine dominance condition must hold for all t >= 1: compare the
    # value at t = 1 and the slope.
    if (1.0 + C**2 * eps) ** 2 >= 1.0 + eta / 2.0:
        return False
    if (1.0 + C**2 * eps) * (C - 1.0) >= C:
        return False
    return True


def contraction_schedule(eta: float, C_bhp: float) -> Schedule:
    """Compute (l, epsilon, k, n) for a given target eta and boundary
    Harnack constant C > 1."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if C_bhp <= 1:
        raise ValueError("C must exceed 1")
    C = C_bhp
    target = 1.0 + eta * (C + 1.0)
    t = C
    l = 0
    if t >= target:
        while t >= target:
            t = _phi(t, eta, C)
            l += 1
            if l > 10_000_000:
                raise RuntimeError("contraction iteration failed to converge")
    else:
        l = 1  # already below target after one application

    # Largest epsilon satisfying the stage conditions, found by bisection,
    # then backed off slightly for strictness.
    lo, hi = 0.0, 1.0
    while not _epsilon_ok(hi, eta, C) and hi > 1e-12:
        hi /= 2.0
    if hi <= 1e-12:
        raise RuntimeError("no admissible epsilon")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _epsilon_ok(mid, eta, C):
            lo = mid
        else:
            hi = mid
    eps = lo * 0.99
    k = int(math.floor(C**2 / eps**2)) + 1
    return Schedule(
        eta=eta,
        C=C,
        l=l,
        epsilon=eps,
        k=k,
        n=l * k,
        fixed_point=1.0 + eta * (C + 1.0) / 2.0,
    )


@dataclass
class MartinEstimate:
    probe: tuple
    x0: tuple
    target: tuple | str
    levels: list  # per level: dict(ratio, stderr, ro, v_points)
    value: float
    stderr: float
    converged: bool


def estimate_martin_kernel(
    spec: ProcessSpec,
    domain: Domain,
    probes,
    x0,
    target,
    approach_levels,
    mc_n: int,
    seed: int = 0,
    workers: int = 1,
    ro_tol: float = 0.1,
    max_steps: int = 10_000,
) -> list[MartinEstimate]:
    """Estimate the Martin kernel at ``target`` as the limit of Green-ratio
    estimates along approach levels.

    ``approach_levels`` is a list of levels; each level is an array of
    approach points v inside the domain tending to the target.  All Green
    values for one start point share a single chain set, so per-level
    ratios are strongly correlated across v, which is what the oscillation
    diagnostic wants to see.
    """
    x0 = np.asarray(x0, dtype=float)
    all_v = np.concatenate([np.atleast_2d(np.asarray(lv, dtype=float)) for lv in approach_levels])
    level_sizes = [len(np.atleast_2d(np.asarray(lv))) for lv in approach_levels]
    g0, e0 = green_samples_multi(
        spec, domain, x0, all_v, mc_n, seed=seed, workers=workers, max_steps=max_steps
    )
    out = []
    for pi, probe in enumerate(np.atleast_2d(np.asarray(probes, dtype=float))):
        gx, ex = green_samples_multi(
            spec, domain, probe, all_v, mc_n, seed=seed + 7919 * (pi + 1),
            workers=workers, max_steps=max_steps,
        )
        levels = []
        idx = 0
        for lsz, lv in zip(level_sizes, approach_levels):
            sl = slice(idx, idx + lsz)
            idx += lsz
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = gx[sl] / g0[sl]
                rel = np.sqrt(
                    (ex[sl] / np.maximum(gx[sl], 1e-300)) ** 2
                    + (e0[sl] / np.maximum(g0[sl], 1e-300)) ** 2
                )
            ok = np.isfinite(ratios) & (ratios > 0)
            if not np.any(ok):
                levels.append(
                    {"ratio": math.nan, "stderr": math.inf, "ro": math.inf,
                     "v_points": np.atleast_2d(lv).tolist()}
                )
                continue
            ratio = float(np.mean(ratios[ok]))
            stderr = float(ratio * np.mean(rel[ok]) / math.sqrt(ok.sum()))
            levels.append(
                {
                    "ratio": ratio,
                    "stderr": float(ratio * np.mean(rel[ok])),
                    "mean_stderr": stderr,
                    "ro": oscillation_range(ratios[ok]),
                    "v_points": np.atleast_2d(lv).tolist(),
                }
            )
        last = levels[-1]
        prev = levels[-2] if len(levels) > 1 else last
        cauchy = abs(last["ratio"] - prev["ratio"]) <= 2.0 * (
            last["stderr"] + prev["stderr"]
        ) + ro_tol * abs(last["ratio"])
        converged = (
            math.isfinite(last["ratio"])
            and last["ro"] - 1.0 < ro_tol
            and cauchy
        )
        out.append(
            MartinEstimate(
                probe=tuple(probe),
                x0=tuple(x0),
                target=target if isinstance(target, str) else tuple(np.asarray(target)),
                levels=levels,
                value=last["ratio"],
                stderr=last["stderr"],
                converged=converged,
            )
        )
    return out


def lambda_functional(
    spec: ProcessSpec,
    z0,
    p: float,
    f,
    q: float | None = None,
    radial: bool = False,
    epsrel: float = 1e-8,
) -> float:
    """Levy-tail functional: integral of j(|z0 - y|) f(y) outside the ball
    B(z0, p) (optionally restricted to the annulus p < |y - z0| < q).

    ``radial=True`` means f depends only on |y - z0| and is called with the
    radius; otherwise f is called with the point (supported for d = 2).
    """
    if p <= 0:
        raise ValueError("p must be positive")
    z0 = np.asarray(z0, dtype=float)
    d = spec.d
    upper = q if q is not None else np.inf
    if q is not None and q <= p:
        raise ValueError("need q > p")
    from .closed_forms import _sphere_area

    if radial:
        area = _sphere_area(d)

        def integrand(r):
            return float(spec.levy_density(r)) * float(f(r)) * area * r ** (d - 1)

        val, err = integrate.quad(
            integrand, p, upper, epsrel=epsrel, epsabs=0.0, limit=400
        )
    elif d == 2:

        def integrand(theta, r):
            y = z0 + r * np.array([math.cos(theta), math.sin(theta)])
            return float(spec.levy_density(r)) * float(f(y)) * r

        val, err = integrate.dblquad(
            integrand, p, upper, 0.0, 2.0 * math.pi, epsrel=epsrel, epsabs=0.0
        )
    else:
        raise NotImplementedError("non-radial integrand supported for d = 2 only")
    if not math.isfinite(val):
        raise ArithmeticError("Levy-tail quadrature did not converge")
    return val


def _ball_mass(z0, R, f, d, epsrel=1e-7):
    """Integral of f over B(z0, R) (d = 2)."""
    if d != 2:
        raise NotImplementedError("factorization residuals supported for d = 2")
    z0 = np.asarray(z0, dtype=float)

    def integrand(theta, r):
        y = z0 + r * np.array([math.cos(theta), math.sin(theta)])
        return float(f(y)) * r

    val, _ = integrate.dblquad(
        integrand, 0.0, R, 0.0, 2.0 * math.pi, epsrel=epsrel, epsabs=0.0
    )
    return val


def factorization_residual(
    spec: ProcessSpec,
    domain: Domain,
    z0,
    f,
    r: float,
    a: float,
    sample_pts,
    mc_n: int,
    seed: int = 0,
    mode: str = "F1",
    poisson_estimator=None,
) -> dict:
    """Empirical approximate-factorization constant.

    F1 (finite point): ratios f(x) / (E_x[tau_D] * Lambda_{ar/2}(f)) over
    sample points in D intersect B(z0, r/8).
    F2 (infinity): ratios f(x) / (P_D(x, z0) * int_{B(z0, 2ar)} f) over
    sample points in D outside the closed ball of radius 8r.
    Returns the ratios and their max/min, an empirical bound for C(a)^2.
    """
    z0 = np.asarray(z0, dtype=float)
    pts = np.atleast_2d(np.asarray(sample_pts, dtype=float))
    fx = np.array([float(f(x)) for x in pts])
    if np.all(fx < 1e-300):
        raise ValueError("degenerate sample: f vanishes at every sample point")
    dist = np.linalg.norm(pts - z0, axis=1)
    ratios = []
    if mode == "F1":
        if not (0.5 < a < 1.0):
            raise ValueError("F1 requires a in (1/2, 1)")
        if np.any(dist > r / 8.0):
            raise ValueError("F1 sample points must lie in B(z0, r/8)")
        lam = lambda_functional(spec, z0, a * r / 2.0, f)
        for x, val in zip(pts, fx):
            et = estimate_exit_time(spec, domain, x, mc_n, seed=seed)
            ratios.append(val / (et.value * lam))
    elif mode == "F2":
        if not (1.0 < a < 2.0):
            raise ValueError("F2 requires a in (1, 2)")
        if np.any(dist < 8.0 * r):
            raise ValueError("F2 sample points must lie outside B(z0, 8r)")
        mass = _ball_mass(z0, 2.0 * a * r, f, spec.d)
        from .simulation import estimate_poisson_kernel

        pk = poisson_estimator or estimate_poisson_kernel
        for x, val in zip(pts, fx):
            p = pk(spec, domain, x, z0, mc_n, seed=seed)
            ratios.append(val / (p.value * mass))
    else:
        raise ValueError("mode must be 'F1' or 'F2'")
    ratios = np.asarray(ratios)
    return {
        "ratios": ratios.tolist(),
        "C_squared": float(ratios.max() / ratios.min()),
        "mode": mode,
        "a": a,
    }


def _singular_tail_quadrature(spec, domain, kernel, U, x, singularity, delta):
    """Exact contribution of the exit law near a kernel singularity:
    integral of P_U(x, y) kernel(y) over B(singularity, delta) \\ U,
    restricted to the ambient domain, using the closed-form ball exit
    kernel.  Only available for ball sub-domains in the plane."""
    from .closed_forms import BallSpec, ball_poisson_kernel
    from .geometry import Ball

    if not isinstance(U, Ball):
        raise ValueError("singularity handling requires a ball sub-domain")
    if spec.d != 2:
        raise NotImplementedError("singularity handling implemented for d = 2")
    z = np.asarray(singularity, dtype=float)
    if np.linalg.norm(z - np.asarray(U.center)) <= U.radius + delta:
        raise ValueError("singular neighborhood must not touch the sub-domain")
    bs = BallSpec(U.center, U.radius, spec.alpha, spec.d)

    def integrand(theta, rho):
        y = z + rho * np.array([math.cos(theta), math.sin(theta)])
        if not bool(domain.contains(y)) or bool(U.contains(y)):
            return 0.0
        p = float(ball_poisson_kernel(bs, x, y))
        return rho * p * float(kernel(y[None, :])[0])

    val, _ = integrate.dblquad(
        integrand, 0.0, delta, -math.pi, math.pi, epsabs=1e-10, epsrel=1e-8
    )
    return float(val)


def harmonicity_check(
    spec: ProcessSpec,
    domain: Domain,
    kernel,
    U: Domain,
    x,
    mc_n: int,
    seed: int = 0,
    workers: int = 1,
    singularity=None,
    sing_radius: float | None = None,
) -> dict:
    """Mean-value residual of a candidate harmonic function: compare
    kernel(x) with the average of kernel at the exit position from U,
    counting exits that leave the ambient domain as zero.

    If the kernel blows up at a boundary point, plain averaging has
    infinite variance (rare exits land arbitrarily close to the pole with
    super-quadratic values), so pass that point as ``singularity``: the
    exit-law mass within ``sing_radius`` of it is then integrated exactly
    against the closed-form ball exit kernel, and only the bounded
    remainder is averaged by Monte Carlo."""
    x = np.asarray(x, dtype=float)
    if not U.contains(x):
        raise ValueError("x must lie in U")
    delta = 0.0
    tail = 0.0
    z = None
    if singularity is not None:
        z = np.asarray(singularity, dtype=float)
        if sing_radius is None:
            from .geometry import Ball

            if not isinstance(U, Ball):
                raise ValueError("sing_radius required for non-ball sub-domains")
            gap = float(np.linalg.norm(z - np.asarray(U.center))) - U.radius
            sing_radius = 0.5 * gap
        delta = float(sing_radius)
        if delta <= 0.0:
            raise ValueError("sing_radius must be positive")
        tail = _singular_tail_quadrature(spec, domain, kernel, U, x, z, delta)
    exit_pts, _, trunc = exit_samples(spec, U, x, mc_n, seed, workers=workers)
    ok = ~trunc
    vals = np.zeros(mc_n)
    pts = exit_pts[ok]
    in_domain = domain.contains(pts)
    if z is not None:
        in_domain &= np.linalg.norm(pts - z, axis=1) >= delta
    idx = np.flatnonzero(ok)
    if np.any(in_domain):
        vals[idx[in_domain]] = kernel(pts[in_domain])
    mean = float(vals.mean()) + tail
    stderr = float(vals.std(ddof=1) / math.sqrt(mc_n))
    target = float(kernel(np.atleast_2d(x))[0])
    return {
        "value": target,
        "mc_mean": mean,
        "stderr": stderr,
        "residual_sigmas": abs(target - mean) / stderr if stderr > 0 else math.inf,
    }
