"""Seeded simulation of the continuous-time example price processes.

All simulators share one reproducibility contract: a counter-based generator
(Philox) keyed by (seed, stream) with one jumped substream per path, so the
same (config, seed) pair is bit-identical regardless of how paths are
batched, and the gamma draws of the bubble-birth model live on a stream
disjoint from the Gaussian one (the volatility clock must be independent of
the driving noise).

Log-price stepping is used everywhere a positive price is simulated: the
log is accumulated with cumulative sums of per-step drift and volatility
terms, so a zero-volatility configuration reproduces the exponential drift
curve exactly and a constant-volatility configuration is arithmetic-identical
between simulators that share the stepping core.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import BadConfig, EmbeddingFailure

GAUSS_STREAM = 0
GAMMA_STREAM = 1

_NEAR_ZERO = 1e-12
_CAP = 1e12

# covariance-matrix square roots stay affordable up to this many increments
_CHOLESKY_FALLBACK_LIMIT = 4096


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid with steps+1 points from t0 to t1 inclusive."""

    t0: float
    t1: float
    steps: int

    def __post_init__(self):
        if not self.t1 > self.t0:
            raise BadConfig(f"need t1 > t0, got [{self.t0}, {self.t1}]")
        if not (isinstance(self.steps, (int, np.integer)) and self.steps >= 1):
            raise BadConfig(f"steps must be a positive integer, got {self.steps!r}")

    @property
    def spacing(self) -> float:
        return (self.t1 - self.t0) / self.steps

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.steps + 1) * self.spacing


@dataclass
class PathEnsemble:
    """Simulated paths plus everything needed to regenerate them.

    paths has shape (n_paths, steps+1); aux carries per-path marks such as
    the gamma draw or a hitting index; config is the fully resolved input
    (embedded in exports so a file regenerates itself byte-for-byte).
    """

    grid: TimeGrid
    paths: np.ndarray
    seed: int
    config: dict
    aux: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]


def _check_common(grid: TimeGrid, n_paths, seed):
    if not isinstance(grid, TimeGrid):
        raise BadConfig(f"grid must be a TimeGrid, got {type(grid).__name__}")
    if not (isinstance(n_paths, (int, np.integer)) and n_paths >= 1):
        raise BadConfig(f"n_paths must be a positive integer, got {n_paths!r}")
    if not isinstance(seed, (int, np.integer)):
        raise BadConfig(f"seed must be an integer, got {seed!r}")


def _stream_base(seed: int, stream: int) -> np.random.Philox:
    return np.random.Philox(np.random.SeedSequence((int(seed), int(stream))))


def _path_gen(base: np.random.Philox, path: int) -> np.random.Generator:
    return np.random.Generator(base.jumped(path))


def _log_euler_row(s0: float, mu: float, vol: np.ndarray, dt: float,
                   t_rel: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """One path of S_k = s0 * exp(mu*t_k - 1/2 sum v^2 dt + sum v sqrt(dt) xi).

    vol holds the per-step volatility at the left endpoints; t_rel the grid
    offsets t_k - t0 for k >= 1.  Cumulative sums keep the sigma=0 case an
    exact exponential and make equal vol arrays produce identical bits.
    """
    log_part = -0.5 * np.cumsum(vol * vol * dt) + np.cumsum(vol * math.sqrt(dt) * xi)
    out = np.empty(len(t_rel) + 1)
    out[0] = s0
    out[1:] = s0 * np.exp(mu * t_rel + log_part)
    return out


def simulate_gbm(mu, sigma, s0, grid: TimeGrid, n_paths: int, seed: int) -> PathEnsemble:
    """Geometric Brownian motion by exact log-Euler stepping."""
    _check_common(grid, n_paths, seed)
    mu, sigma, s0 = float(mu), float(sigma), float(s0)
    if sigma < 0:
        raise BadConfig(f"sigma must be nonnegative, got {sigma}")
    if not s0 > 0:
        raise BadConfig(f"s0 must be positive, got {s0}")
    steps = grid.steps
    dt = grid.spacing
    t_rel = np.arange(1, steps + 1) * dt
    vol = np.full(steps, sigma)
    base = _stream_base(seed, GAUSS_STREAM)
    paths = np.empty((n_paths, steps + 1))
    for i in range(n_paths):
        xi = _path_gen(base, i).standard_normal(steps)
        paths[i] = _log_euler_row(s0, mu, vol, dt, t_rel, xi)
    config = {"kind": "gbm", "mu": mu, "sigma": sigma, "s0": s0,
              "grid": {"t0": grid.t0, "t1": grid.t1, "steps": steps},
              "n_paths": int(n_paths), "seed": int(seed)}
    return PathEnsemble(grid, paths, int(seed), config)


def uniform_gamma(rng: np.random.Generator) -> float:
    """Uniform draw on (0, 1]; the default birth-time law."""
    return 1.0 - rng.random()


def simulate_bubble_birth(mu, v0, gamma_sampler: Optional[Callable], grid: TimeGrid,
                          n_paths: int, seed: int) -> PathEnsemble:
    """Price whose volatility rises as v0*(1 + 1/(1-t)) once t passes the draw gamma.

    gamma draws come from a dedicated stream, one substream per path, and
    must land in (0, 1].  Grids ending strictly before 1 are simulated in
    full.  A grid ending exactly at 1 cannot step through the volatility
    singularity: the last column is not simulated but set to 0 on paths with
    gamma < 1 (the process converges there) and to the last simulated value
    on gamma = 1 paths.
    """
    _check_common(grid, n_paths, seed)
    mu, v0 = float(mu), float(v0)
    if not v0 > 0:
        raise BadConfig(f"v0 must be positive, got {v0}")
    if grid.t0 < 0 or grid.t1 > 1:
        raise BadConfig(f"grid must lie inside [0, 1], got [{grid.t0}, {grid.t1}]")
    sampler = uniform_gamma if gamma_sampler is None else gamma_sampler
    patch_final = grid.t1 == 1.0
    steps = grid.steps
    n_sim = steps - 1 if patch_final else steps
    if patch_final and n_sim == 0:
        raise BadConfig("a grid ending at 1 needs at least 2 steps to simulate anything")
    dt = grid.spacing
    t_left = grid.t0 + np.arange(n_sim) * dt
    t_rel = np.arange(1, n_sim + 1) * dt
    gauss = _stream_base(seed, GAUSS_STREAM)
    marks = _stream_base(seed, GAMMA_STREAM)
    paths = np.empty((n_paths, steps + 1))
    gammas = np.empty(n_paths)
    for i in range(n_paths):
        g = float(sampler(_path_gen(marks, i)))
        if not 0 < g <= 1:
            raise BadConfig(f"gamma draw {g} outside (0, 1]")
        gammas[i] = g
        active = (t_left >= g) & (t_left < 1.0)
        vol = v0 * (1.0 + np.where(active, 1.0 / (1.0 - t_left), 0.0))
        xi = _path_gen(gauss, i).standard_normal(n_sim)
        paths[i, : n_sim + 1] = _log_euler_row(1.0, mu, vol, dt, t_rel, xi)
        if patch_final:
            paths[i, steps] = paths[i, steps - 1] if g == 1.0 else 0.0
    config = {"kind": "bubble_birth", "mu": mu, "v0": v0,
              "grid": {"t0": grid.t0, "t1": grid.t1, "steps": steps},
              "n_paths": int(n_paths), "seed": int(seed)}
    return PathEnsemble(grid, paths, int(seed), config, {"gamma": gammas})


def _fgn_autocov(hurst: float, n_lags: int) -> np.ndarray:
    k = np.arange(n_lags + 1, dtype=float)
    h2 = 2.0 * hurst
    return 0.5 * ((k + 1) ** h2 - 2 * k ** h2 + np.abs(k - 1) ** h2)


def _circulant_eigenvalues(hurst: float, n: int) -> np.ndarray:
    g = _fgn_autocov(hurst, n)
    row = np.concatenate([g, g[-2:0:-1]])
    ev = np.fft.fft(row).real
    floor = -1e-10 * ev.max()
    if ev.min() < floor:
        raise EmbeddingFailure(
            f"circulant embedding not nonnegative for hurst={hurst}, n={n} "
            f"(min eigenvalue {ev.min():.3e})"
        )
    return np.clip(ev, 0.0, None)


def _fgn_rows_circulant(gen: np.random.Generator, ev: np.ndarray, n: int) -> np.ndarray:
    """One row of n unit-spacing fractional Gaussian noise samples."""
    m = 2 * n
    u = gen.standard_normal(m)
    a = np.empty(m, dtype=complex)
    a[0] = math.sqrt(ev[0] / m) * u[0]
    a[n] = math.sqrt(ev[n] / m) * u[n]
    half = np.sqrt(ev[1:n] / (2 * m))
    a[1:n] = half * (u[1:n] + 1j * u[n + 1:])
    a[n + 1:] = np.conj(a[1:n][::-1])
    return np.fft.fft(a).real[:n]


def simulate_fbm_model(hurst, mu, grid: TimeGrid, n_paths: int, seed: int) -> PathEnsemble:
    """X_t = exp(fBm_t + mu*t) on a uniform grid, with the first-passage proxy.

    Fractional increments come from circulant embedding with exact target
    covariance; if the embedding fails for the grid, a covariance-matrix
    square root takes over (affordable for small grids only).  aux records
    hit_index, the first grid index with X <= 1/2, or -1 when the path never
    gets there within the horizon.
    """
    _check_common(grid, n_paths, seed)
    hurst, mu = float(hurst), float(mu)
    if not 0 < hurst < 1:
        raise BadConfig(f"hurst must be inside (0, 1), got {hurst}")
    steps = grid.steps
    scale = grid.spacing ** hurst
    chol = None
    ev = None
    try:
        ev = _circulant_eigenvalues(hurst, steps)
    except EmbeddingFailure:
        if steps > _CHOLESKY_FALLBACK_LIMIT:
            raise
        g = _fgn_autocov(hurst, steps - 1)
        idx = np.abs(np.arange(steps)[:, None] - np.arange(steps)[None, :])
        chol = np.linalg.cholesky(g[idx])
    times = grid.times()
    base = _stream_base(seed, GAUSS_STREAM)
    paths = np.empty((n_paths, steps + 1))
    hit = np.full(n_paths, -1, dtype=np.int64)
    for i in range(n_paths):
        gen = _path_gen(base, i)
        if chol is None:
            fgn = _fgn_rows_circulant(gen, ev, steps)
        else:
            fgn = chol @ gen.standard_normal(steps)
        w = np.empty(steps + 1)
        w[0] = 0.0
        np.cumsum(fgn * scale, out=w[1:])
        x = np.exp(w + mu * times)
        paths[i] = x
        below = np.nonzero(x <= 0.5)[0]
        if below.size:
            hit[i] = below[0]
    config = {"kind": "fbm", "hurst": hurst, "mu": mu,
              "grid": {"t0": grid.t0, "t1": grid.t1, "steps": steps},
              "n_paths": int(n_paths), "seed": int(seed),
              "time_change": False}
    return PathEnsemble(grid, paths, int(seed), config, {"hit_index": hit})


def simulate_fbm_time_changed(hurst, mu, grid: TimeGrid, n_paths: int, seed: int) -> PathEnsemble:
    """The clock-changed variant: value at t is X evaluated at tan(t), frozen at 1/2.

    The grid lives in t-space and must end strictly before pi/2 (tan blows up
    there; the frozen value 1/2 is the known limit beyond).  Implemented as a
    grid reparameterization: fBm is sampled directly on the non-uniform tan
    times through a covariance-matrix square root, never by interpolating
    paths.  From the first grid index with X <= 1/2 onward the path is set to
    1/2 exactly; aux records that index (-1 if the path never crosses).
    """
    _check_common(grid, n_paths, seed)
    hurst, mu = float(hurst), float(mu)
    if not 0 < hurst < 1:
        raise BadConfig(f"hurst must be inside (0, 1), got {hurst}")
    if grid.t0 < 0 or grid.t1 >= math.pi / 2:
        raise BadConfig(f"time-changed grid must lie inside [0, pi/2), got [{grid.t0}, {grid.t1}]")
    if grid.steps > _CHOLESKY_FALLBACK_LIMIT:
        raise BadConfig(f"non-uniform sampling is limited to {_CHOLESKY_FALLBACK_LIMIT} steps")
    u = np.tan(grid.times())
    pos = np.nonzero(u > 0)[0]
    up = u[pos]
    h2 = 2.0 * hurst
    cov = 0.5 * (up[:, None] ** h2 + up[None, :] ** h2 - np.abs(up[:, None] - up[None, :]) ** h2)
    chol = np.linalg.cholesky(cov + 1e-14 * np.eye(len(up)) * max(cov.max(), 1.0))
    base = _stream_base(seed, GAUSS_STREAM)
    n_pts = grid.steps + 1
    paths = np.empty((n_paths, n_pts))
    hit = np.full(n_paths, -1, dtype=np.int64)
    for i in range(n_paths):
        w = np.zeros(n_pts)
        w[pos] = chol @ _path_gen(base, i).standard_normal(len(pos))
        x = np.exp(w + mu * u)
        below = np.nonzero(x <= 0.5)[0]
        if below.size:
            hit[i] = below[0]
            x[below[0]:] = 0.5
        paths[i] = x
    config = {"kind": "fbm", "hurst": hurst, "mu": mu,
              "grid": {"t0": grid.t0, "t1": grid.t1, "steps": grid.steps},
              "n_paths": int(n_paths), "seed": int(seed),
              "time_change": True}
    return PathEnsemble(grid, paths, int(seed), config, {"hit_index": hit})


def simulate_inverse_bessel(grid: TimeGrid, n_paths: int, seed: int) -> PathEnsemble:
    """1/|B_t| for a 3-D Brownian motion started at (1,0,0).

    Paths whose driving motion comes within 1e-12 of the origin at a grid
    point are capped at 1e12 and flagged in aux['capped']; estimators must
    exclude them (aux['capped_count'] reports how many).  At desk scale the
    flag never fires.
    """
    _check_common(grid, n_paths, seed)
    if grid.t0 != 0:
        raise BadConfig(f"inverse Bessel grid must start at 0, got t0={grid.t0}")
    steps = grid.steps
    sq = math.sqrt(grid.spacing)
    base = _stream_base(seed, GAUSS_STREAM)
    paths = np.empty((n_paths, steps + 1))
    capped = np.zeros(n_paths, dtype=bool)
    start = np.array([1.0, 0.0, 0.0])
    for i in range(n_paths):
        incr = _path_gen(base, i).standard_normal((steps, 3)) * sq
        b = start + np.cumsum(incr, axis=0)
        norms = np.empty(steps + 1)
        norms[0] = 1.0
        np.sqrt(np.einsum("ij,ij->i", b, b), out=norms[1:])
        low = norms < _NEAR_ZERO
        if low.any():
            capped[i] = True
            norms[low] = 1.0 / _CAP
        paths[i] = 1.0 / norms
    config = {"kind": "inverse_bessel",
              "grid": {"t0": grid.t0, "t1": grid.t1, "steps": steps},
              "n_paths": int(n_paths), "seed": int(seed)}
    aux = {"capped": capped, "capped_count": int(capped.sum())}
    return PathEnsemble(grid, paths, int(seed), config, aux)
