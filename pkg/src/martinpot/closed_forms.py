"""Closed forms for the isotropic alpha-stable process on balls and on the
whole space: Poisson kernel, Green function, expected exit time, Martin
kernel and the Riesz kernel.  Every Monte-Carlo estimator in this package
is validated against these formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import betainc, betaln, gammaln


@dataclass(frozen=True)
class BallSpec:
    """A ball together with the stable index used on it."""

    center: tuple
    radius: float
    alpha: float
    d: int

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if not (0.0 < self.alpha < 2.0):
            raise ValueError("alpha must be in (0, 2)")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))


def poisson_constant(d: int, alpha: float) -> float:
    """C(d, alpha) = Gamma(d/2) pi^(-d/2-1) sin(pi alpha / 2)."""
    return math.exp(gammaln(d / 2.0)) * math.pi ** (-d / 2.0 - 1.0) * math.sin(
        math.pi * alpha / 2.0
    )


def green_constant(d: int, alpha: float) -> float:
    """B(d, alpha) = Gamma(d/2) / (2^alpha pi^(d/2) Gamma(alpha/2)^2)."""
    return math.exp(gammaln(d / 2.0) - 2.0 * gammaln(alpha / 2.0)) / (
        2.0**alpha * math.pi ** (d / 2.0)
    )


def exit_time_constant(d: int, alpha: float) -> float:
    """c(d, alpha) = Gamma(d/2) / (2^alpha Gamma(1+alpha/2) Gamma((d+alpha)/2))."""
    return math.exp(
        gammaln(d / 2.0) - gammaln(1.0 + alpha / 2.0) - gammaln((d + alpha) / 2.0)
    ) / 2.0**alpha


def riesz_constant(d: int, alpha: float) -> float:
    """A(d, alpha) = Gamma((d-alpha)/2) / (2^alpha pi^(d/2) Gamma(alpha/2))."""
    if alpha >= d:
        raise ValueError("Riesz kernel requires alpha < d")
    return math.exp(gammaln((d - alpha) / 2.0) - gammaln(alpha / 2.0)) / (
        2.0**alpha * math.pi ** (d / 2.0)
    )


def ball_poisson_kernel(ball: BallSpec, x, z) -> np.ndarray | float:
    """Exit density from the ball: x strictly inside, z strictly outside
    the closed ball.  Vectorized over rows of z."""
    c = np.asarray(ball.center)
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    z2 = np.atleast_2d(z)
    rx = float(np.linalg.norm(x - c))
    if rx >= ball.radius:
        raise ValueError("x must lie in the open ball")
    rz = np.linalg.norm(z2 - c, axis=1)
    if np.any(rz <= ball.radius):
        raise ValueError("z must lie strictly outside the closed ball")
    r2 = ball.radius**2
    val = (
        poisson_constant(ball.d, ball.alpha)
        * ((r2 - rx**2) / (rz**2 - r2)) ** (ball.alpha / 2.0)
        * np.linalg.norm(z2 - x, axis=1) ** (-ball.d)
    )
    return float(val[0]) if single else val


def _green_profile(w, d: int, alpha: float):
    """int_0^w s^(alpha/2-1) (1+s)^(-d/2) ds, vectorized in w."""
    w = np.asarray(w, dtype=float)
    if alpha < d:
        # Regularized incomplete beta with argument w/(1+w).
        full = math.exp(betaln(alpha / 2.0, (d - alpha) / 2.0))
        return full * betainc(alpha / 2.0, (d - alpha) / 2.0, w / (1.0 + w))
    out = np.empty(w.shape)
    flat = out.reshape(-1)
    for i, wi in enumerate(w.reshape(-1)):
        flat[i], _ = integrate.quad(
            lambda s: s ** (alpha / 2.0 - 1.0) * (1.0 + s) ** (-d / 2.0),
            0.0,
            wi,
            epsrel=1e-12,
            epsabs=0.0,
            limit=200,
        )
    return out


def ball_green(ball: BallSpec, x, y) -> np.ndarray | float:
    """Green function of the stable process killed outside the ball.
    Vectorized over rows of y."""
    c = np.asarray(ball.center)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    y2 = np.atleast_2d(y)
    rx = float(np.linalg.norm(x - c))
    ry = np.linalg.norm(y2 - c, axis=1)
    if rx >= ball.radius or np.any(ry >= ball.radius):
        raise ValueError("both points must lie in the open ball")
    dxy = np.linalg.norm(y2 - x, axis=1)
    if np.any(dxy == 0.0):
        raise ValueError("Green function is singular on the diagonal")
    r2 = ball.radius**2
    w = (r2 - rx**2) * (r2 - ry**2) / (r2 * dxy**2)
    val = (
        green_constant(ball.d, ball.alpha)
        * dxy ** (ball.alpha - ball.d)
        * _green_profile(w, ball.d, ball.alpha)
    )
    return float(val[0]) if single else val


def ball_expected_exit(ball: BallSpec, x) -> np.ndarray | float:
    """Expected exit time c(d,alpha) (r^2 - |x-c|^2)^(alpha/2)."""
    c = np.asarray(ball.center)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    rx = np.linalg.norm(x2 - c, axis=1)
    if np.any(rx >= ball.radius):
        raise ValueError("x must lie in the open ball")
    val = exit_time_constant(ball.d, ball.alpha) * (
        ball.radius**2 - rx**2
    ) ** (ball.alpha / 2.0)
    return float(val[0]) if single else val


def ball_martin_kernel(ball: BallSpec, x, z, x0) -> float:
    """Martin kernel of the ball at a boundary point z, normalized to 1 at
    the base point x0."""
    c = np.asarray(ball.center)
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    z = np.asarray(z, dtype=float)
    if not math.isclose(float(np.linalg.norm(z - c)), ball.radius, rel_tol=1e-9):
        raise ValueError("z must lie on the sphere")
    rx = float(np.linalg.norm(x - c))
    r0 = float(np.linalg.norm(x0 - c))
    if rx >= ball.radius or r0 >= ball.radius:
        raise ValueError("x and x0 must lie in the open ball")
    r2 = ball.radius**2
    return float(
        ((r2 - rx**2) / (r2 - r0**2)) ** (ball.alpha / 2.0)
        * (np.linalg.norm(x0 - z) / np.linalg.norm(x - z)) ** ball.d
    )


def riesz_green(alpha: float, d: int, x, y) -> float:
    """Whole-space Green function A(d,alpha) |x-y|^(alpha-d) (transient case)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dxy = float(np.linalg.norm(x - y))
    if dxy == 0.0:
        raise ValueError("singular on the diagonal")
    return riesz_constant(d, alpha) * dxy ** (alpha - d)


def _sphere_area(d: int) -> float:
    return 2.0 * math.pi ** (d / 2.0) / math.exp(gammaln(d / 2.0))


def poisson_radial_tail(ball: BallSpec, rho: float) -> float:
    """P(|X_exit - c| > rho) for exit from the center: the radial law of the
    exit point is r/sqrt(U) with U ~ Beta(alpha/2, 1 - alpha/2)."""
    from scipy.stats import beta as beta_dist

    if rho <= ball.radius:
        return 1.0
    u = (ball.radius / rho) ** 2
    return float(beta_dist.cdf(u, ball.alpha / 2.0, 1.0 - ball.alpha / 2.0))


def poisson_normalization(ball: BallSpec, x, epsrel: float = 1e-9) -> float:
    """Quadrature of the Poisson kernel over the exterior; equals 1 because
    the stable process exits a ball by a jump almost surely."""
    c = np.asarray(ball.center)
    x = np.asarray(x, dtype=float)
    rx = float(np.linalg.norm(x - c))
    d, r = ball.d, ball.radius
    if rx == 0.0:
        area = _sphere_area(d)

        def radial(rho):
            zpt = c.copy()
            zpt[0] += rho
            return ball_poisson_kernel(ball, x, zpt) * area * rho ** (d - 1)

        val, _ = integrate.quad(
            radial, r, np.inf, epsrel=epsrel, epsabs=0.0, limit=400
        )
        return val

    # Off-center: reduce to (rho, polar angle) using rotational symmetry
    # about the axis through x.
    axis = (x - c) / rx
    if d == 1:
        raise NotImplementedError("d >= 2 required for off-center normalization")
    ring = _sphere_area(d - 1) if d > 2 else 2.0

    def integrand(theta, rho):
        # Point at |z-c| = rho, angle theta from the x-axis.
        z = c + axis * (rho * math.cos(theta))
        # Any unit vector orthogonal to axis works by symmetry.
        perp = np.zeros(d)
        k = int(np.argmin(np.abs(axis)))
        perp[k] = 1.0
        perp -= axis * float(perp @ axis)
        perp /= np.linalg.norm(perp)
        z = z + perp * rho * math.sin(theta)
        dens = ball_poisson_kernel(ball, x, z)
        jac = rho ** (d - 1) * math.sin(theta) ** (d - 2) if d > 2 else rho
        return dens * jac * ring

    val, _ = integrate.dblquad(
        integrand, r, np.inf, 0.0, math.pi, epsabs=0.0, epsrel=epsrel
    )
    return val
