"""Power evaluation: Monte Carlo engine, closed forms, dominance and regularity scans.

The MC engine draws in fixed-size blocks whose RNG streams are derived from
``SeedSequence([root_seed, *path, block_index])``.  Blocks can be evaluated by
any number of worker threads (``SPLITLAB_WORKERS``); the reduction runs in
block order, so results are bit-identical regardless of worker count.

Dominance scans compare estimates with 3-standard-error buffers: they are
evidence at grid resolution, never proofs.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import InputError, NumericalError
from .families import GaussianFamilyD, LocationFamily1D
from .tests import Test

__all__ = [
    "PowerEstimate",
    "PowerCurve",
    "MoranParams1D",
    "power_mc",
    "power_moran_1d_closed",
    "power_curve",
    "dominance_scan",
    "DominanceReport",
    "regularity_check",
    "RegularityReport",
    "derive_rng",
    "default_radius_grid",
]

MC_BLOCK_SIZE = 262_144
MIN_MC_SAMPLES = 1_000
REGULARITY_EPS = 0.01  # power at the top radius must exceed 1 - eps


def derive_rng(root_seed: int, *path: int) -> np.random.Generator:
    """Deterministic child stream: same (seed, path) always yields the same draws."""
    return np.random.default_rng(np.random.SeedSequence([int(root_seed), *map(int, path)]))


def _worker_count() -> int:
    raw = os.environ.get("SPLITLAB_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class PowerEstimate:
    """Point estimate of the power beta(theta) of a test.

    ``std_error`` is the binomial-type error sqrt(v(1-v)/n) for MC estimates
    and exactly 0 for closed-form or quadrature values.
    """

    value: float
    std_error: float
    n_samples: int
    method: str  # "mc" | "quadrature" | "closed_form"

    def __post_init__(self):
        if not (-1e-12 <= self.value <= 1.0 + 1e-12):
            raise InputError(f"power value outside [0,1]: {self.value}")


@dataclass(frozen=True)
class PowerCurve:
    theta_grid: tuple
    estimates: tuple[PowerEstimate, ...]
    test_id: str
    family_id: str
    seed: int

    def __post_init__(self):
        if len(self.theta_grid) != len(self.estimates):
            raise InputError("PowerCurve: grid and estimates lengths differ")


@dataclass(frozen=True)
class MoranParams1D:
    """Resolved thresholds of a 1-d single-split test."""

    a: float
    b1: float
    b2: float
    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise InputError(f"alpha must be in (0,1), got {self.alpha}")
        if self.alpha < 0.5 and not self.b2 < self.b1:
            raise InputError(f"expected b2 < b1 for alpha < 1/2, got {self.b2} >= {self.b1}")

    @classmethod
    def from_test(cls, test: Test) -> "MoranParams1D":
        p = test.params
        return cls(a=p["a"], b1=p["b1"], b2=p["b2"], alpha=p["alpha"])


# ---------------------------------------------------------------------------
# Sampling dispatch
# ---------------------------------------------------------------------------


def _family_id(family) -> str:
    if isinstance(family, GaussianFamilyD):
        return family.name
    if isinstance(family, LocationFamily1D):
        return family.name
    f1, f2 = family
    return f"{f1.name}|{f2.name}"


def _draw(test: Test, family, theta, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw n observations from the shifted law on the test's data space."""
    if test.model == "pair1d":
        if isinstance(family, LocationFamily1D):
            f1 = f2 = family
        else:
            f1, f2 = family
        theta = float(theta)
        x1 = f1.sample(rng, n, theta)
        x2 = f2.sample(rng, n, theta)
        return np.column_stack([x1, x2])
    if not isinstance(family, GaussianFamilyD):
        raise InputError(f"{test.name}: gaussian_nd model needs a GaussianFamilyD")
    d = family.dim
    if d != test.params["d"]:
        raise InputError(
            f"{test.name}: family dimension {d} != test dimension {test.params['d']}"
        )
    theta = np.zeros(d) + np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise InputError("theta must be finite")
    return rng.standard_normal((n, test.params["n"], d)) + theta


def _mc_mean(test: Test, family, theta, n_samples: int, seed: int,
             path: tuple[int, ...] = ()) -> float:
    """Blocked MC mean of the test function under the shifted law."""
    n_samples = int(n_samples)
    blocks = []
    start = 0
    idx = 0
    while start < n_samples:
        blocks.append((idx, min(MC_BLOCK_SIZE, n_samples - start)))
        start += MC_BLOCK_SIZE
        idx += 1

    def _one(block) -> float:
        bidx, size = block
        rng = derive_rng(seed, *path, bidx)
        x = _draw(test, family, theta, rng, size)
        phi = np.asarray(test.evaluate(x), dtype=float)
        if not np.all(np.isfinite(phi)):
            bad = int(np.flatnonzero(~np.isfinite(phi))[0])
            raise NumericalError(
                f"{test.name}: non-finite test value at sample {bidx * MC_BLOCK_SIZE + bad}"
            )
        return float(phi.sum())

    workers = _worker_count()
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sums = list(pool.map(_one, blocks))
    else:
        sums = [_one(b) for b in blocks]
    total = 0.0
    for s in sums:  # fixed-order reduction
        total += s
    return total / n_samples


def power_mc(test: Test, family, theta, n_samples: int, seed: int) -> PowerEstimate:
    """Unbiased MC estimate of E_theta[phi(X)] with binomial-type standard error.

    Randomized tests contribute their fractional values directly (no auxiliary
    coin flips); identical seeds give identical output.
    """
    if int(n_samples) < MIN_MC_SAMPLES:
        raise InputError(f"power_mc: n_samples must be >= {MIN_MC_SAMPLES}, got {n_samples}")
    value = _mc_mean(test, family, theta, n_samples, seed)
    se = math.sqrt(max(value * (1.0 - value), 0.0) / n_samples)
    return PowerEstimate(value=value, std_error=se, n_samples=int(n_samples), method="mc")


def power_moran_1d_closed(params: MoranParams1D, families, theta: float) -> PowerEstimate:
    """Closed-form power of the 1-d split test from the product decomposition
    over the independent pair:

        beta(theta) = (1 - F1(a-theta)) (1 - F2(b1-theta)) + F1(a-theta) F2(b2-theta)
    """
    f1, f2 = families
    t = float(theta)
    p_hi = float(1.0 - f1.cdf(params.a - t)) * float(1.0 - f2.cdf(params.b1 - t))
    p_lo = float(f1.cdf(params.a - t)) * float(f2.cdf(params.b2 - t))
    return PowerEstimate(value=p_hi + p_lo, std_error=0.0, n_samples=0, method="closed_form")


def power_curve(test: Test, family, theta_grid: Sequence, n_samples: int,
                seed: int) -> PowerCurve:
    """Elementwise MC power over a grid of shifts, one derived stream per point."""
    if int(n_samples) < MIN_MC_SAMPLES:
        raise InputError(f"power_curve: n_samples must be >= {MIN_MC_SAMPLES}")
    estimates = []
    for i, theta in enumerate(theta_grid):
        try:
            value = _mc_mean(test, family, theta, n_samples, seed, path=(i,))
        except NumericalError as exc:
            raise NumericalError(f"power_curve at grid index {i}: {exc}") from exc
        se = math.sqrt(max(value * (1.0 - value), 0.0) / n_samples)
        estimates.append(PowerEstimate(value, se, int(n_samples), "mc"))
    grid_key = tuple(
        tuple(np.atleast_1d(np.asarray(t, dtype=float)).tolist()) if np.ndim(t) else float(t)
        for t in theta_grid
    )
    return PowerCurve(
        theta_grid=grid_key,
        estimates=tuple(estimates),
        test_id=test.name,
        family_id=_family_id(family),
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# Dominance and regularity scans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DominanceReport:
    """Grid-resolution comparison of two tests with 3-SE buffers.

    ``ge_everywhere`` is true when a's power is at least b's minus the buffer
    at every grid point; ``strict_points`` lists shifts where a beats b by
    more than the buffer.  ``gaps`` carries the raw per-point numbers.
    """

    ge_everywhere: bool
    strict_points: tuple
    gaps: tuple


def dominance_scan(test_a: Test, test_b: Test, family, theta_grid: Sequence,
                   n_samples: int, seed: int) -> DominanceReport:
    """Compare two tests on a shift grid using common random numbers per point."""
    if test_a.model != test_b.model:
        raise InputError("dominance_scan: tests must share the data model")
    ge = True
    strict = []
    gaps = []
    for i, theta in enumerate(theta_grid):
        # Same derived stream for both tests: the draws are shared, which
        # sharpens the comparison without biasing either estimate.
        va = _mc_mean(test_a, family, theta, n_samples, seed, path=(i,))
        vb = _mc_mean(test_b, family, theta, n_samples, seed, path=(i,))
        se_a = math.sqrt(max(va * (1.0 - va), 0.0) / n_samples)
        se_b = math.sqrt(max(vb * (1.0 - vb), 0.0) / n_samples)
        buffer = 3.0 * math.hypot(se_a, se_b)
        if va < vb - buffer:
            ge = False
        if va > vb + buffer:
            strict.append(theta)
        gaps.append({
            "theta": theta, "value_a": va, "value_b": vb,
            "se_a": se_a, "se_b": se_b, "diff": va - vb, "buffer": buffer,
        })
    return DominanceReport(ge_everywhere=ge, strict_points=tuple(strict), gaps=tuple(gaps))


@dataclass(frozen=True)
class RegularityReport:
    """Power along rays theta = r*u for increasing radii in each direction."""

    limits_to_one: bool
    min_power_at_max_radius: float
    max_radius: float
    table: tuple  # (direction index, radius, power) triples
    directions: tuple


def default_radius_grid(max_radius: float = 10.0, n: int = 25) -> np.ndarray:
    """Log-spaced radii, 25 per direction by default."""
    return np.geomspace(max_radius / 40.0, max_radius, n)


def regularity_check(test: Test, family, radius_grid: Sequence, directions: Sequence,
                     n_samples: int, seed: int, eps: float = REGULARITY_EPS):
    """Estimate power along rays and flag whether it reaches 1 - eps everywhere.

    ``limits_to_one`` is true iff the power at the largest radius exceeds
    1 - eps in every direction.  This is a numerical diagnostic of the
    vanishing-risk property, not a proof of it.
    """
    radii = [float(r) for r in radius_grid]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise InputError("regularity_check: radius_grid must be increasing")
    table = []
    top_powers = []
    for j, u in enumerate(directions):
        u = np.asarray(u, dtype=float)
        for i, r in enumerate(radii):
            theta = r * u if u.ndim else r * float(u)
            value = _mc_mean(test, family, theta, n_samples, seed, path=(j, i))
            table.append((j, r, value))
            if i == len(radii) - 1:
                top_powers.append(value)
    min_top = min(top_powers)
    return RegularityReport(
        limits_to_one=bool(min_top > 1.0 - eps),
        min_power_at_max_radius=float(min_top),
        max_radius=radii[-1],
        table=tuple(table),
        directions=tuple(np.asarray(u, dtype=float).tolist() if np.ndim(u) else float(u)
                         for u in directions),
    )
