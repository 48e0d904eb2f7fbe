"""Symmetric Levy process models: radial characteristic exponents, Levy
densities and the two-sided power scaling checks used by the accessibility
criteria.

A process is described by its radial characteristic exponent ``psi0`` and a
radial Levy density ``levy_density``.  For the isotropic alpha-stable process
both are exact power laws; for (iterated) geometric stable subordinate
Brownian motions ``psi0`` comes from the iterated Laplace exponent
``log(1 + lambda^(alpha/2))`` and the Levy density is defined through the
small/large-radius asymptotic ``psi0(1/r) / r^d`` taken as an equality.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln


def stable_levy_constant(d: int, alpha: float) -> float:
    """Normalization A(d, alpha) of the stable Levy density
    j0(r) = A(d, alpha) r^(-d-alpha), chosen so that the characteristic
    exponent is exactly |xi|^alpha."""
    return (
        alpha
        * 2.0 ** (alpha - 1.0)
        * math.exp(gammaln((d + alpha) / 2.0) - gammaln(1.0 - alpha / 2.0))
        / math.pi ** (d / 2.0)
    )


@dataclass(frozen=True)
class ProcessSpec:
    """Radial description of a symmetric Levy process on R^d."""

    d: int
    psi0: Callable[[float], float]
    levy_density: Callable[[float], float]
    scaling_lower: tuple[float, float]  # (delta, a) lower envelope
    scaling_upper: tuple[float, float]  # (delta, a) upper envelope
    model_tag: str
    alpha: float | None = None
    iterations: int | None = None

    @property
    def is_stable(self) -> bool:
        return self.model_tag == "stable"

    def to_json(self) -> str:
        rec: dict = {"model": self.model_tag, "d": self.d}
        if self.alpha is not None:
            rec["alpha"] = self.alpha
        if self.iterations is not None:
            rec["iterations"] = self.iterations
        return json.dumps(rec)


@dataclass
class ScalingReport:
    """Power-law envelope fit of psi0(t)/psi0(s) over a grid of pairs."""

    which: str  # "H1" or "H2"
    delta_lower: float
    delta_upper: float
    a_lower: float
    a_upper: float
    ratios: list = field(default_factory=list)
    passed: bool = False


def make_stable(alpha: float, d: int) -> ProcessSpec:
    """Isotropic alpha-stable process: psi0(t) = t^alpha, pure power-law
    Levy density, all four scaling indices equal to alpha/2."""
    if not (0.0 < alpha < 2.0):
        raise ValueError(f"alpha must be in (0, 2), got {alpha}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    const = stable_levy_constant(d, alpha)

    def psi0(t):
        return np.abs(t) ** alpha

    def j0(r):
        return const * np.asarray(r, dtype=float) ** (-d - alpha)

    return ProcessSpec(
        d=d,
        psi0=psi0,
        levy_density=j0,
        scaling_lower=(alpha / 2.0, 1.0),
        scaling_upper=(alpha / 2.0, 1.0),
        model_tag="stable",
        alpha=alpha,
    )


def geometric_laplace_exponent(alpha: float, iterations: int) -> Callable[[float], float]:
    """Iterated geometric Laplace exponent phi_n, phi_1(l) = log(1 + l^(a/2))."""

    def phi(lam):
        out = np.asarray(lam, dtype=float)
        for _ in range(iterations):
            out = np.log1p(out ** (alpha / 2.0))
        return out

    return phi


def make_geometric_stable(alpha: float, d: int, iterations: int = 1) -> ProcessSpec:
    """Subordinate Brownian motion driven by an (iterated) geometric
    (alpha/2)-stable subordinator: psi0(t) = phi_n(t^2)."""
    if d >= 3:
        ok = 0.0 < alpha <= 2.0
    else:
        ok = 0.0 < alpha < 2.0
    if not ok:
        raise ValueError(f"alpha={alpha} out of range for d={d}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    phi = geometric_laplace_exponent(alpha, iterations)

    def psi0(t):
        return phi(np.asarray(t, dtype=float) ** 2)

    def j0(r):
        # Asymptotic psi0(1/r)/r^d taken as an equality; positive and
        # nonincreasing because psi0 is nondecreasing.
        r = np.asarray(r, dtype=float)
        return psi0(1.0 / r) / r**d

    return ProcessSpec(
        d=d,
        psi0=psi0,
        levy_density=j0,
        scaling_lower=(math.nan, math.nan),
        scaling_upper=(alpha / 4.0, math.nan),
        model_tag="geometric_stable",
        alpha=alpha,
        iterations=iterations,
    )


def levy_density_asymptotic(spec: ProcessSpec, r) -> np.ndarray | float:
    """psi0(1/r) / r^d — the two-sided comparison profile for the Levy
    density near 0 (under H1) and near infinity (under H2)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    out = spec.psi0(1.0 / r) / r**spec.d
    return out if out.ndim else float(out)


# Pass thresholds for the envelope fit: per-pair exponents must stay inside
# (0, 1) and must not drift across scales (a drifting exponent means no
# single power law brackets the ratio uniformly).  Drift is measured
# multiplicatively: the typical exponent may not shrink or grow by more
# than a factor of 2 between the low-scale and high-scale halves.
_EXPONENT_FLOOR = 0.01
_DRIFT_FACTOR = 2.0


def check_scaling(
    spec: ProcessSpec, which: str, grid: Sequence[tuple[float, float]]
) -> ScalingReport:
    """Fit two-sided power envelopes to psi0(t)/psi0(s) over (s, t) pairs.

    H1 constrains t >= s >= 1 (scaling at infinity), H2 constrains
    s <= t <= 1 (scaling at zero).  Pairs violating the ordering are
    rejected.  The report passes iff the per-pair log-log exponents lie in
    (0, 1) and are stable across scales.
    """
    if which not in ("H1", "H2"):
        raise ValueError(f"which must be 'H1' or 'H2', got {which!r}")
    pairs = []
    for s, t in grid:
        if t <= s:
            raise ValueError(f"need t > s in every pair, got ({s}, {t})")
        if which == "H1" and s < 1.0:
            raise ValueError(f"H1 requires t >= s >= 1, got ({s}, {t})")
        if which == "H2" and t > 1.0:
            raise ValueError(f"H2 requires s <= t <= 1, got ({s}, {t})")
        pairs.append((s, t))
    if not pairs:
        raise ValueError("empty grid")

    log_ts = np.array([math.log(t / s) for s, t in pairs])
    log_ratio = np.array(
        [math.log(float(spec.psi0(t)) / float(spec.psi0(s))) for s, t in pairs]
    )
    exponents = log_ratio / (2.0 * log_ts)
    delta_lo = float(exponents.min())
    delta_hi = float(exponents.max())

    # Envelope constants for the fitted exponents.
    a_lo = float(np.exp((log_ratio - 2.0 * delta_lo * log_ts).min()))
    a_hi = float(np.exp((log_ratio - 2.0 * delta_hi * log_ts).max()))

    # Drift check: compare exponents on low-scale vs high-scale pairs (the
    # uniform envelope fails when the local exponent wanders with scale).
    log_scale = np.array([math.log(s * t) for s, t in pairs])
    order = np.argsort(log_scale)
    half = len(order) // 2
    if half >= 1 and len(order) >= 4:
        med_near = float(np.median(exponents[order[:half]]))
        med_far = float(np.median(exponents[order[half:]]))
        if med_near > 0.0 and med_far > 0.0:
            drift = max(med_near / med_far, med_far / med_near)
        else:
            drift = math.inf
    else:
        drift = 1.0

    passed = (
        _EXPONENT_FLOOR < delta_lo <= delta_hi < 1.0 - _EXPONENT_FLOOR
        and drift <= _DRIFT_FACTOR
    )
    return ScalingReport(
        which=which,
        delta_lower=delta_lo,
        delta_upper=delta_hi,
        a_lower=a_lo,
        a_upper=a_hi,
        ratios=[
            (s, t, float(np.exp(lr))) for (s, t), lr in zip(pairs, log_ratio)
        ],
        passed=passed,
    )


def spec_from_json(text: str | dict) -> ProcessSpec:
    """Build a ProcessSpec from a JSON descriptor such as
    {"model": "stable", "alpha": 1.0, "d": 2}."""
    rec = json.loads(text) if isinstance(text, str) else dict(text)
    model = rec.get("model")
    if model == "stable":
        return make_stable(float(rec["alpha"]), int(rec["d"]))
    if model == "geometric_stable":
        return make_geometric_stable(
            float(rec["alpha"]), int(rec["d"]), int(rec.get("iterations", 1))
        )
    raise ValueError(f"unknown process model {model!r}")
