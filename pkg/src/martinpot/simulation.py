"""Monte-Carlo engine: exact walk-on-spheres exit sampling for isotropic
stable processes, time-stepped paths for subordinate Brownian motions, and
collocation estimators for Green functions, exit times, Poisson kernels and
harmonic measure.

Randomness is counter-based: every replicate chunk owns a Philox stream
keyed by (seed, stream index), and chunk statistics are merged in stream
order, so results are bit-identical for a fixed seed regardless of how the
chunks are scheduled across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .closed_forms import (
    BallSpec,
    exit_time_constant,
    poisson_constant,
    green_constant,
    _green_profile,
)
from .geometry import Domain
from .process import ProcessSpec

DEFAULT_CHUNK = 1 << 16


@dataclass(frozen=True)
class RngStream:
    """Counter-based stream: identical (seed, stream) reproduces identical
    draws."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.Generator(
            np.random.Philox(key=np.array([self.seed, self.stream], dtype=np.uint64))
        )


@dataclass
class ExitRecord:
    """One walk-on-spheres chain."""

    centers: list
    radii: list
    exit_point: np.ndarray | None
    weight: float  # accumulated expected-exit-time mass
    steps: int
    truncated: bool


@dataclass
class Estimate:
    value: float
    stderr: float
    n: int
    seed: int
    diverged: bool = False
    info: dict = field(default_factory=dict)

    def agrees_with(self, other: float, sigmas: float = 3.0) -> bool:
        return abs(self.value - other) <= sigmas * self.stderr


def _merge_moments(parts):
    """Combine per-chunk (count, mean, M2) in order."""
    n, mean, m2 = 0, 0.0, 0.0
    for cn, cmean, cm2 in parts:
        if cn == 0:
            continue
        delta = cmean - mean
        tot = n + cn
        mean += delta * cn / tot
        m2 += cm2 + delta * delta * n * cn / tot
        n = tot
    return n, mean, m2


def _moments(values: np.ndarray):
    n = len(values)
    if n == 0:
        return 0, 0.0, 0.0
    mean = float(values.mean())
    return n, mean, float(((values - mean) ** 2).sum())


def _run_chunks(worker, n: int, seed: int, workers: int = 1, chunk: int = DEFAULT_CHUNK):
    """Evaluate worker(rng, count, chunk_index) over disjoint streams and
    return the list of results in stream order."""
    sizes = []
    left = n
    while left > 0:
        sizes.append(min(chunk, left))
        left -= chunk
    tasks = [(i, sz) for i, sz in enumerate(sizes)]

    def run(task):
        i, sz = task
        rng = RngStream(seed, i).generator()
        return worker(rng, sz, i)

    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, tasks))
    return [run(t) for t in tasks]


def _finalize(parts, seed, extra=None, diverged=False):
    n, mean, m2 = _merge_moments(parts)
    stderr = math.sqrt(m2 / (n - 1) / n) if n > 1 else float("inf")
    return Estimate(
        value=mean, stderr=stderr, n=n, seed=seed, diverged=diverged,
        info=dict(extra or {}),
    )


# ---------------------------------------------------------------------------
# Exact ball-exit sampling
# ---------------------------------------------------------------------------

def _center_exit_offsets(rng, alpha: float, d: int, radius, n: int) -> np.ndarray:
    """Exit points of the stable process from B(0, radius) started at the
    center.  Radial law: radius / sqrt(U) with U ~ Beta(alpha/2, 1-alpha/2);
    direction uniform by isotropy.  ``radius`` may be scalar or length-n."""
    u = rng.beta(alpha / 2.0, 1.0 - alpha / 2.0, size=n)
    radius = np.asarray(radius, dtype=float)
    rho = radius / np.sqrt(u)
    # the exact law puts the exit strictly outside a.s., but U -> 1 draws
    # can round rho onto the boundary; nudge them just past it
    rho = np.maximum(rho, radius * (1.0 + 1e-9))
    dirs = rng.standard_normal((n, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return dirs * rho[:, None]


def sample_ball_exit(rng, alpha: float, d: int, center, radius: float, x=None):
    """One exit point from B(center, radius), started at x (default: the
    center).  Off-center starts use rejection against the exact Poisson
    kernel with the center law as proposal."""
    center = np.asarray(center, dtype=float)
    if x is None:
        x = center
    x = np.asarray(x, dtype=float)
    rx = float(np.linalg.norm(x - center))
    if rx >= radius:
        raise ValueError("start point must lie in the open ball")
    if rx == 0.0:
        return center + _center_exit_offsets(rng, alpha, d, radius, 1)[0]
    bound = (radius / (radius - rx)) ** d
    while True:
        z = center + _center_exit_offsets(rng, alpha, d, radius, 1)[0]
        rho = float(np.linalg.norm(z - center))
        ratio = (rho / float(np.linalg.norm(z - x))) ** d
        if rng.random() * bound <= ratio:
            return z


# ---------------------------------------------------------------------------
# Walk-on-spheres core
# ---------------------------------------------------------------------------

def _wos_batch(
    rng,
    spec: ProcessSpec,
    domain: Domain,
    x,
    n: int,
    shell_eps: float,
    max_steps: int,
    step_hook=None,
):
    """Run n walk-on-spheres chains from x.  Returns (exit_points, weights,
    steps, truncated).  ``step_hook(active_idx, centers, radii)`` is called
    once per step with the inscribed balls before the jump."""
    alpha, d = spec.alpha, spec.d
    cw = exit_time_constant(d, alpha)
    pts = np.tile(np.asarray(x, dtype=float), (n, 1))
    weights = np.zeros(n)
    steps = np.zeros(n, dtype=np.int64)
    truncated = np.zeros(n, dtype=bool)
    exit_pts = np.full((n, d), np.nan)
    active = np.arange(n)
    for _ in range(max_steps):
        if len(active) == 0:
            break
        cur = pts[active]
        radii = domain.dist_to_complement(cur)
        small = radii < shell_eps
        if np.any(small):
            truncated[active[small]] = True
            keep = ~small
            active = active[keep]
            cur = cur[keep]
            radii = radii[keep]
            if len(active) == 0:
                break
        if step_hook is not None:
            step_hook(active, cur, radii)
        weights[active] += cw * radii**alpha
        steps[active] += 1
        offs = _center_exit_offsets(rng, alpha, d, radii, len(active))
        nxt = cur + offs
        pts[active] = nxt
        still_in = domain.contains(nxt)
        done = active[~still_in]
        exit_pts[done] = nxt[~still_in]
        active = active[still_in]
    if len(active) > 0:
        truncated[active] = True
    return exit_pts, weights, steps, truncated


def wos_exit(
    rng,
    spec: ProcessSpec,
    domain: Domain,
    x,
    shell_eps: float = 1e-6,
    max_steps: int = 10_000,
) -> ExitRecord:
    """One explicit walk-on-spheres chain (exact for stable processes)."""
    if not spec.is_stable:
        raise ValueError("walk-on-spheres requires a stable process spec")
    if not domain.contains(np.asarray(x, dtype=float)):
        raise ValueError("start point must lie in the domain")
    centers, radii = [], []

    def hook(active, cur, r):
        centers.append(cur[0].copy())
        radii.append(float(r[0]))

    exit_pts, weights, steps, truncated = _wos_batch(
        rng, spec, domain, x, 1, shell_eps, max_steps, step_hook=hook
    )
    ep = None if truncated[0] else exit_pts[0]
    return ExitRecord(
        centers=centers,
        radii=radii,
        exit_point=ep,
        weight=float(weights[0]),
        steps=int(steps[0]),
        truncated=bool(truncated[0]),
    )


def _check_wos_inputs(spec, domain, x):
    if not spec.is_stable:
        raise ValueError("walk-on-spheres estimators require a stable process")
    if not domain.contains(np.asarray(x, dtype=float)):
        raise ValueError("start point must lie in the domain")


def _stabilization_diverged(prefix_means):
    """Heuristic divergence flag: running mean growing by >= 1.5x per
    doubling for 4 consecutive doublings."""
    growths = []
    for a, b in zip(prefix_means, prefix_means[1:]):
        if a > 0:
            growths.append(b / a)
    run = 0
    for g in growths:
        run = run + 1 if g >= 1.5 else 0
        if run >= 4:
            return True
    return False


def estimate_exit_time(
    spec: ProcessSpec,
    domain: Domain,
    x,
    n: int,
    seed: int,
    workers: int = 1,
    shell_eps: float = 1e-6,
    max_steps: int = 10_000,
) -> Estimate:
    """Mean accumulated ball weight over walk-on-spheres chains; unbiased
    for the expected exit time."""
    _check_wos_inputs(spec, domain, x)

    def worker(rng, count, _):
        _, w, _, trunc = _wos_batch(rng, spec, domain, x, count, shell_eps, max_steps)
        return _moments(w), int(trunc.sum()), w

    results = _run_chunks(worker, n, seed, workers)
    parts = [r[0] for r in results]
    truncated = sum(r[1] for r in results)

    # Stabilization probe on geometrically growing prefixes (stream order).
    all_w = np.concatenate([r[2] for r in results])
    prefix_means, k = [], 256
    while k <= len(all_w):
        prefix_means.append(float(all_w[:k].mean()))
        k *= 2
    diverged = _stabilization_diverged(prefix_means)
    return _finalize(
        parts, seed,
        extra={"truncated_frac": truncated / n, "prefix_means": prefix_means},
        diverged=diverged,
    )


def estimate_harmonic_measure(
    spec: ProcessSpec,
    domain: Domain,
    x,
    target: Domain,
    n: int,
    seed: int,
    workers: int = 1,
    shell_eps: float = 1e-6,
    max_steps: int = 10_000,
) -> Estimate:
    """Fraction of walk-on-spheres exits landing in ``target`` (a region of
    the exterior of the domain)."""
    _check_wos_inputs(spec, domain, x)

    def worker(rng, count, _):
        exit_pts, _, _, trunc = _wos_batch(
            rng, spec, domain, x, count, shell_eps, max_steps
        )
        hits = np.zeros(count)
        ok = ~trunc
        if np.any(ok):
            hits[ok] = target.contains(exit_pts[ok]).astype(float)
        return _moments(hits), int(trunc.sum())

    results = _run_chunks(worker, n, seed, workers)
    return _finalize(
        [r[0] for r in results], seed,
        extra={"truncated_frac": sum(r[1] for r in results) / n},
    )


def exit_samples(
    spec: ProcessSpec,
    domain: Domain,
    x,
    n: int,
    seed: int,
    workers: int = 1,
    shell_eps: float = 1e-6,
    max_steps: int = 10_000,
):
    """Exit points and chain weights for n chains (rows are chains; NaN rows
    mark truncated chains)."""
    _check_wos_inputs(spec, domain, x)

    def worker(rng, count, _):
        exit_pts, w, _, trunc = _wos_batch(
            rng, spec, domain, x, count, shell_eps, max_steps
        )
        return exit_pts, w, trunc

    results = _run_chunks(worker, n, seed, workers)
    return (
        np.concatenate([r[0] for r in results]),
        np.concatenate([r[1] for r in results]),
        np.concatenate([r[2] for r in results]),
    )


def estimate_poisson_kernel(
    spec: ProcessSpec,
    domain: Domain,
    x,
    z,
    n: int,
    seed: int,
    workers: int = 1,
    shell_eps: float = 1e-6,
    max_steps: int = 10_000,
) -> Estimate:
    """Collocation estimator of the Poisson kernel at an exterior point z:
    sum over the chain of the sub-density of each inscribed ball at z."""
    _check_wos_inputs(spec, domain, x)
    z = np.asarray(z, dtype=float)
    if domain.contains(z):
        raise ValueError("z must lie outside the domain")
    alpha, d = spec.alpha, spec.d
    cpk = poisson_constant(d, alpha)

    def worker(rng, count, _):
        acc = np.zeros(count)

        def hook(active, centers, radii):
            dz = np.linalg.norm(z - centers, axis=1)
            # Balls are inside D and z is outside, so dz >= radius; guard
            # the touching case.
            gap = np.maximum(dz**2 - radii**2, 1e-300)
            acc[active] += cpk * radii**alpha * gap ** (-alpha / 2.0) * dz ** (-d)

        _wos_batch(rng, spec, domain, x, count, shell_eps, max_steps, step_hook=hook)
        return _moments(acc)

    results = _run_chunks(worker, n, seed, workers)
    return _finalize(results, seed)


def estimate_green(
    spec: ProcessSpec,
    domain: Domain,
    x,
    y,
    n: int,
    seed: int,
    workers: int = 1,
    excl_radius: float = 1e-3,
    shell_eps: float = 1e-6,
    max_steps: int = 10_000,
) -> Estimate:
    """Collocation estimator of G_D(x, y): sum over the chain of the ball
    Green function at y whenever y falls inside the inscribed ball."""
    _check_wos_inputs(spec, domain, x)
    y = np.asarray(y, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    if float(np.linalg.norm(x_arr - y)) <= excl_radius:
        raise ValueError("x and y too close (diagonal variance blow-up)")
    alpha, d = spec.alpha, spec.d
    cg = green_constant(d, alpha)

    def worker(rng, count, _):
        acc = np.zeros(count)

        def hook(active, centers, radii):
            dy = np.linalg.norm(y - centers, axis=1)
            inside = dy < radii
            if not np.any(inside):
                return
            dyi = np.maximum(dy[inside], excl_radius)
            r2 = radii[inside] ** 2
            w = (r2 * (r2 - dy[inside] ** 2)) / (r2 * dyi**2)
            acc[active[inside]] += (
                cg * dyi ** (alpha - d) * _green_profile(w, d, alpha)
            )

        _wos_batch(rng, spec, domain, x, count, shell_eps, max_steps, step_hook=hook)
        return _moments(acc)

    results = _run_chunks(worker, n, seed, workers)
    return _finalize(results, seed)


def green_samples_multi(
    spec: ProcessSpec,
    domain: Domain,
    x,
    targets: np.ndarray,
    n: int,
    seed: int,
    workers: int = 1,
    excl_radius: float = 1e-3,
    shell_eps: float = 1e-6,
    max_steps: int = 10_000,
):
    """Per-chain Green collocation values for several targets at once,
    sharing one chain set.  Returns (means, stderrs) arrays."""
    _check_wos_inputs(spec, domain, x)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    alpha, d = spec.alpha, spec.d
    cg = green_constant(d, alpha)
    m = len(targets)

    def worker(rng, count, _):
        acc = np.zeros((m, count))

        def hook(active, centers, radii):
            for j, y in enumerate(targets):
                dy = np.linalg.norm(y - centers, axis=1)
                inside = dy < radii
                if not np.any(inside):
                    continue
                dyi = np.maximum(dy[inside], excl_radius)
                r2 = radii[inside] ** 2
                w = (r2 * (r2 - dy[inside] ** 2)) / (r2 * dyi**2)
                acc[j, active[inside]] += (
                    cg * dyi ** (alpha - d) * _green_profile(w, d, alpha)
                )

        _wos_batch(rng, spec, domain, x, count, shell_eps, max_steps, step_hook=hook)
        return [_moments(acc[j]) for j in range(m)]

    results = _run_chunks(worker, n, seed, workers)
    means = np.empty(m)
    errs = np.empty(m)
    for j in range(m):
        cn, mean, m2 = _merge_moments([r[j] for r in results])
        means[j] = mean
        errs[j] = math.sqrt(m2 / (cn - 1) / cn) if cn > 1 else float("inf")
    return means, errs


def growth_weights_by_annulus(
    spec: ProcessSpec,
    domain: Domain,
    x,
    center,
    edges,
    n: int,
    seed: int,
    workers: int = 1,
    shell_eps: float = 1e-6,
    max_steps: int = 10_000,
):
    """Expected-exit-time mass attributed to radial annuli around ``center``
    (balls binned by their center's radius).  Returns per-annulus means of
    the accumulated weights."""
    _check_wos_inputs(spec, domain, x)
    center = np.asarray(center, dtype=float)
    edges = np.asarray(edges, dtype=float)
    alpha, d = spec.alpha, spec.d
    cw = exit_time_constant(d, alpha)
    nb = len(edges) - 1

    def worker(rng, count, _):
        acc = np.zeros((nb, count))

        def hook(active, centers, radii):
            rad = np.linalg.norm(centers - center, axis=1)
            bins = np.searchsorted(edges, rad, side="right") - 1
            ok = (bins >= 0) & (bins < nb)
            w = cw * radii**alpha
            np.add.at(acc, (bins[ok], active[ok]), w[ok])

        _, _, _, trunc = _wos_batch(
            rng, spec, domain, x, count, shell_eps, max_steps, step_hook=hook
        )
        return [_moments(acc[j]) for j in range(nb)], int(trunc.sum())

    results = _run_chunks(worker, n, seed, workers)
    means = np.empty(nb)
    errs = np.empty(nb)
    for j in range(nb):
        cn, mean, m2 = _merge_moments([r[0][j] for r in results])
        means[j] = mean
        errs[j] = math.sqrt(m2 / (cn - 1) / cn) if cn > 1 else float("inf")
    truncated = sum(r[1] for r in results)
    return means, errs, truncated / n


# ---------------------------------------------------------------------------
# Subordinate Brownian motion paths
# ---------------------------------------------------------------------------

def sample_one_sided_stable(rng, a: float, size=None):
    """Standard positive a-stable variable, E[exp(-lam S)] = exp(-lam^a),
    via the Kanter representation."""
    if not (0.0 < a < 1.0):
        raise ValueError("index must be in (0, 1)")
    u = rng.uniform(0.0, math.pi, size=size)
    w = rng.standard_exponential(size=size)
    A = (
        np.sin(a * u) ** a
        * np.sin((1.0 - a) * u) ** (1.0 - a)
        / np.sin(u)
    ) ** (1.0 / (1.0 - a))
    return (A / w) ** ((1.0 - a) / a)


def _subordinator_increment(rng, spec: ProcessSpec, dt: float, size: int) -> np.ndarray:
    """Increment of the subordinator over dt for the supported models."""
    a = spec.alpha / 2.0
    if spec.is_stable:
        return dt ** (1.0 / a) * sample_one_sided_stable(rng, a, size)
    if spec.model_tag == "geometric_stable":
        s = np.full(size, float(dt))
        for _ in range(spec.iterations or 1):
            g = rng.gamma(np.maximum(s, 1e-300))
            if a < 1.0:
                s = g ** (1.0 / a) * sample_one_sided_stable(rng, a, size)
            else:
                s = g  # alpha = 2: subordinator time change is the gamma itself
        return s
    raise ValueError(f"no path sampler for model {spec.model_tag!r}")


def path_step(rng, spec: ProcessSpec, dt: float, size: int = 1) -> np.ndarray:
    """Increment of the subordinate Brownian motion over dt:
    sqrt(2 S) * standard normal vector with S the subordinator increment."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    s = _subordinator_increment(rng, spec, dt, size)
    z = rng.standard_normal((size, spec.d))
    return np.sqrt(2.0 * s)[:, None] * z


def estimate_hit_value(
    spec: ProcessSpec,
    domain: Domain,
    target: Domain,
    u,
    x,
    n: int,
    seed: int,
    dt: float = 1e-3,
    horizon: float = 50.0,
    workers: int = 1,
) -> Estimate:
    """Time-stepped estimator of E_x[u(X at first entry into target)] for
    the process killed outside the domain.  Biased by time discretization
    and the horizon; both knobs are explicit and reported."""
    x = np.asarray(x, dtype=float)
    if not domain.contains(x):
        raise ValueError("start point must lie in the domain")
    max_steps = int(math.ceil(horizon / dt))

    def worker(rng, count, _):
        pts = np.tile(x, (count, 1))
        vals = np.zeros(count)
        active = np.arange(count)
        if len(active) > 0:
            hit0 = target.contains(pts[active])
            if np.any(hit0):
                idx = active[hit0]
                vals[idx] = u(pts[idx])
                active = active[~hit0]
        missed = 0
        for _ in range(max_steps):
            if len(active) == 0:
                break
            steps = path_step(rng, spec, dt, len(active))
            nxt = pts[active] + steps
            pts[active] = nxt
            alive = domain.contains(nxt)
            active = active[alive]
            if len(active) == 0:
                break
            hit = target.contains(pts[active])
            if np.any(hit):
                idx = active[hit]
                vals[idx] = u(pts[idx])
                active = active[~hit]
        missed = len(active)
        return _moments(vals), missed

    results = _run_chunks(worker, n, seed, workers)
    return _finalize(
        [r[0] for r in results], seed,
        extra={
            "horizon_miss_frac": sum(r[1] for r in results) / n,
            "dt": dt,
            "horizon": horizon,
        },
    )
