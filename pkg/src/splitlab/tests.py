"""Constructors for every test function in the laboratory.

A test is a measurable function from the data space into [0, 1].  Deterministic
tests are indicators of open rejection regions (strict inequalities only);
randomized Neyman-Pearson tests and clamped blended composites take fractional
values.  Instances are immutable value objects with pure, reentrant
``evaluate``; they vectorize over a leading batch axis.

Data-space conventions:
  * ``pair1d`` model: one observation is a pair ``(x1, x2)``; batched input has
    shape ``(B, 2)``.  ``x1`` is the direction pilot, ``x2`` carries the test.
  * ``gaussian_nd`` model: one observation is the stack of the n raw vectors,
    shape ``(n, d)``; batched input has shape ``(B, n, d)``.  Sub-sample means
    are computed internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np
from scipy import special

from .exceptions import DomainError, InputError
from .families import LocationFamily1D, standard_normal

__all__ = [
    "Test",
    "moran_1d",
    "shifted_pilot_test",
    "z_two_sided",
    "z_one_sided",
    "moran_gaussian_d",
    "chi_square_d",
    "blended",
    "ConvexityRecord",
    "convexity_counterexample",
    "convexity_robustness",
    "split_statistic",
    "chi_square_quantile",
]


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must be in (0,1), got {alpha}")
    return alpha


@dataclass(frozen=True)
class Test:
    """A test function together with its resolved parameters.

    ``kind`` is one of ``region_indicator``, ``np_randomized``, ``blended``,
    ``two_sided_z``, ``chi_square``; ``model`` identifies the data space.
    ``params`` records every resolved threshold for audit output.
    """

    name: str
    kind: str
    model: str  # "pair1d" | "gaussian_nd"
    params: Mapping[str, Any]
    _eval: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def evaluate(self, x):
        """Evaluate the test; returns values in [0, 1].

        Accepts a single observation or a batch with one extra leading axis;
        a single observation yields a plain float.
        """
        x = np.asarray(x, dtype=float)
        if self.model == "pair1d":
            if x.shape == (2,):
                return float(self._eval(x[None, :])[0])
            if x.ndim == 2 and x.shape[1] == 2:
                return self._eval(x)
            raise InputError(f"{self.name}: expected shape (2,) or (B,2), got {x.shape}")
        n, d = self.params["n"], self.params["d"]
        if x.shape == (n, d):
            return float(self._eval(x[None, :, :])[0])
        if x.ndim == 3 and x.shape[1:] == (n, d):
            return self._eval(x)
        raise InputError(
            f"{self.name}: expected shape ({n},{d}) or (B,{n},{d}), got {x.shape}"
        )


# ---------------------------------------------------------------------------
# One-dimensional pair tests
# ---------------------------------------------------------------------------


def _split_region_test(
    cutoff: float, alpha: float, family2: LocationFamily1D, name: str
) -> Test:
    alpha = _check_alpha(alpha)
    cutoff = float(cutoff)
    if not math.isfinite(cutoff):
        raise InputError(f"{name}: pilot cutoff must be finite, got {cutoff}")
    b1 = family2.quantile(1.0 - alpha)
    b2 = family2.quantile(alpha)

    def _eval(x):
        x1, x2 = x[:, 0], x[:, 1]
        return (((x1 > cutoff) & (x2 > b1)) | ((x1 < cutoff) & (x2 < b2))).astype(float)

    return Test(
        name=name,
        kind="region_indicator",
        model="pair1d",
        params={"a": cutoff, "b1": b1, "b2": b2, "alpha": alpha,
                "family2": family2.name},
        _eval=_eval,
    )


def moran_1d(a: float, alpha: float, null_family2: LocationFamily1D) -> Test:
    """Single-split test: the pilot x1 picks the side, x2 runs the one-sided test.

    Rejects on the open region (a,inf)x(b1,inf) union (-inf,a)x(-inf,b2) where
    b1 and b2 are the (1-alpha) and alpha quantiles of the null law of x2.
    The size is exactly alpha for any pilot threshold a:
    (1-F1(a))*alpha + F1(a)*alpha = alpha.
    """
    return _split_region_test(a, alpha, null_family2, f"moran_1d(a={float(a):g})")


def shifted_pilot_test(zeta: float, alpha: float, null_family2: LocationFamily1D) -> Test:
    """Single-split test with the pilot cutoff moved from a to zeta.

    Same rejection shape as :func:`moran_1d`; as zeta escapes to -inf the test
    degenerates to the fixed upper one-sided test on x2 alone.
    """
    return _split_region_test(
        zeta, alpha, null_family2, f"shifted_pilot(zeta={float(zeta):g})"
    )


def z_two_sided(alpha: float, total_n: int) -> Test:
    """Two-sided Z test on the mean of total_n unit-variance Gaussian observations."""
    alpha = _check_alpha(alpha)
    total_n = int(total_n)
    if total_n < 1:
        raise InputError(f"z_two_sided: total_n must be >= 1, got {total_n}")
    z = standard_normal().quantile(1.0 - alpha / 2.0)
    root_n = math.sqrt(total_n)

    def _eval(x):
        return (np.abs(x.mean(axis=1)) * root_n > z).astype(float)

    return Test(
        name="z_two_sided",
        kind="two_sided_z",
        model="pair1d",
        params={"alpha": alpha, "total_n": total_n, "z_crit": z},
        _eval=_eval,
    )


def z_one_sided(alpha: float, total_n: int, direction: int = 1) -> Test:
    """One-sided Z test in a fixed direction; not regular (power dies on one side)."""
    alpha = _check_alpha(alpha)
    total_n = int(total_n)
    if total_n < 1:
        raise InputError(f"z_one_sided: total_n must be >= 1, got {total_n}")
    if direction not in (1, -1):
        raise InputError(f"z_one_sided: direction must be +1 or -1, got {direction}")
    z = standard_normal().quantile(1.0 - alpha)
    root_n = math.sqrt(total_n)

    def _eval(x):
        return (direction * x.mean(axis=1) * root_n > z).astype(float)

    return Test(
        name=f"z_one_sided({'+' if direction > 0 else '-'})",
        kind="region_indicator",
        model="pair1d",
        params={"alpha": alpha, "total_n": total_n, "z_crit": z, "direction": direction},
        _eval=_eval,
    )


# ---------------------------------------------------------------------------
# d-dimensional Gaussian tests
# ---------------------------------------------------------------------------


def chi_square_quantile(p: float, d: int) -> float:
    """Chi-square quantile via regularized incomplete gamma inversion."""
    if not (0.0 < p < 1.0):
        raise DomainError(f"chi_square_quantile: p must be in (0,1), got {p}")
    return float(2.0 * special.gammaincinv(d / 2.0, p))


def split_statistic(u, v) -> float:
    """Projection statistic (u . v) / ||u|| used by the d-dim split test."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu = float(np.linalg.norm(u))
    if nu == 0.0:
        raise InputError("split_statistic: u must be nonzero")
    return float(np.dot(u, v) / nu)


def moran_gaussian_d(alpha: float, m: int, n: int, d: int) -> Test:
    """d-dim Gaussian single-split test.

    The first m vectors give the direction x̄1/||x̄1||; the remaining k = n - m
    vectors give x̄2, and the test rejects on the open region
    (x̄1 . x̄2)/||x̄1|| > D.  Conditionally on x̄1 != 0 the projection of x̄2 on
    that direction is N(0, 1/k) under the null, so D = z_{1-alpha} / sqrt(k)
    gives exact size alpha.  On the null-measure event x̄1 = 0 the test accepts.
    """
    alpha = _check_alpha(alpha)
    m, n, d = int(m), int(n), int(d)
    if not (1 <= m < n):
        raise InputError(f"moran_gaussian_d: need 1 <= m < n, got m={m}, n={n}")
    if d < 1:
        raise InputError(f"moran_gaussian_d: d must be >= 1, got {d}")
    k = n - m
    D = standard_normal().quantile(1.0 - alpha) / math.sqrt(k)

    def _eval(x):
        xbar1 = x[:, :m, :].mean(axis=1)
        xbar2 = x[:, m:, :].mean(axis=1)
        norm1 = np.linalg.norm(xbar1, axis=1)
        nonzero = norm1 > 0.0
        stat = np.zeros(x.shape[0])
        np.divide(
            (xbar1 * xbar2).sum(axis=1), norm1, out=stat, where=nonzero
        )
        return (nonzero & (stat > D)).astype(float)

    return Test(
        name=f"moran_gaussian_d(d={d},m={m},n={n})",
        kind="region_indicator",
        model="gaussian_nd",
        params={"alpha": alpha, "m": m, "n": n, "d": d, "k": k, "D": D},
        _eval=_eval,
    )


def chi_square_d(alpha: float, n: int, d: int) -> Test:
    """Rotation-invariant benchmark: reject when n * ||x̄||^2 exceeds the
    (1-alpha) chi-square quantile with d degrees of freedom."""
    alpha = _check_alpha(alpha)
    n, d = int(n), int(d)
    if n < 1 or d < 1:
        raise InputError(f"chi_square_d: need n >= 1 and d >= 1, got n={n}, d={d}")
    q = chi_square_quantile(1.0 - alpha, d)

    def _eval(x):
        xbar = x.mean(axis=1)
        return (n * np.square(xbar).sum(axis=1) > q).astype(float)

    return Test(
        name=f"chi_square_d(d={d},n={n})",
        kind="chi_square",
        model="gaussian_nd",
        params={"alpha": alpha, "n": n, "d": d, "q": q},
        _eval=_eval,
    )


# ---------------------------------------------------------------------------
# Blended composite
# ---------------------------------------------------------------------------


def blended(base: Test, np_star: Test, zeta: float, eta: float) -> Test:
    """Clamped composite of an NP test inside ||x|| < zeta, the base test
    outside ||x|| > eta, and a uniform floor 1/eta:

        min{ 1,  1{||x||<zeta} * np_star(x) * zeta/(1+zeta)
                + 1{||x||>eta} * base(x) + 1/eta }

    The output always lies in [min(1, 1/eta), 1].
    """
    zeta = float(zeta)
    eta = float(eta)
    if zeta <= 0.0 or eta <= 0.0:
        raise DomainError(f"blended: zeta and eta must be > 0, got {zeta}, {eta}")
    if base.model != "pair1d" or np_star.model != "pair1d":
        raise InputError("blended: base and np_star must live on the pair1d space")
    weight = zeta / (1.0 + zeta)
    floor = 1.0 / eta

    def _eval(x):
        r = np.linalg.norm(x, axis=1)
        inner = (r < zeta) * np_star._eval(x) * weight
        outer = (r > eta) * base._eval(x)
        return np.minimum(1.0, inner + outer + floor)

    return Test(
        name=f"blended(zeta={zeta:g},eta={eta:g})",
        kind="blended",
        model="pair1d",
        params={"zeta": zeta, "eta": eta, "base": base.name, "np_star": np_star.name,
                "floor": floor, "np_weight": weight},
        _eval=_eval,
    )


# ---------------------------------------------------------------------------
# Convexity counterexample for the d-dim acceptance region
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvexityRecord:
    """Two acceptance points whose midpoint lands in the rejection region.

    With u1 = (e1+e2)/sqrt(2), u2 = (e1-e2)/sqrt(2) and v1 = v2 = delta*D*e1,
    both endpoint statistics equal delta*D/sqrt(2) < D while the midpoint
    statistic equals delta*D > D, so the acceptance region of the d-dim split
    test is not convex.
    """

    u1: np.ndarray
    v1: np.ndarray
    u2: np.ndarray
    v2: np.ndarray
    endpoint_statistics: tuple[float, float]
    midpoint_statistic: float
    D: float
    delta: float


def convexity_counterexample(D: float, delta: float, d: int) -> ConvexityRecord:
    """Construct the non-convexity witness; requires d >= 2 and 1 < delta < sqrt(2)."""
    D = float(D)
    delta = float(delta)
    d = int(d)
    if D <= 0.0:
        raise DomainError(f"convexity_counterexample: D must be > 0, got {D}")
    if not (1.0 < delta < math.sqrt(2.0)):
        raise DomainError(
            f"convexity_counterexample: delta must be in (1, sqrt(2)), got {delta}"
        )
    if d < 2:
        raise DomainError(f"convexity_counterexample: d must be >= 2, got {d}")
    e1 = np.zeros(d)
    e1[0] = 1.0
    e2 = np.zeros(d)
    e2[1] = 1.0
    r2 = math.sqrt(2.0)
    u1 = (e1 + e2) / r2
    u2 = (e1 - e2) / r2
    v = delta * D * e1
    s1 = split_statistic(u1, v)
    s2 = split_statistic(u2, v)
    mid = split_statistic((u1 + u2) / 2.0, v)
    return ConvexityRecord(
        u1=u1, v1=v.copy(), u2=u2, v2=v.copy(),
        endpoint_statistics=(s1, s2),
        midpoint_statistic=mid,
        D=D, delta=delta,
    )


def convexity_robustness(
    rec: ConvexityRecord, radius: float, n_draws: int, seed: int
) -> dict:
    """Perturb all four witness points and check the strict inequalities survive.

    Draws ``n_draws`` iid perturbations of norm ``radius`` for each of u1, v1,
    u2, v2 and records the worst-case margins.  Both inequalities hold for
    every draw iff ``min_endpoint_margin`` and ``min_midpoint_margin`` are
    positive.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x8C]))
    d = rec.u1.shape[0]

    def _perturb(v):
        step = rng.standard_normal(d)
        step *= radius / np.linalg.norm(step)
        return v + step

    min_end = math.inf
    min_mid = math.inf
    for _ in range(int(n_draws)):
        pu1, pv1, pu2, pv2 = (_perturb(p) for p in (rec.u1, rec.v1, rec.u2, rec.v2))
        s1 = split_statistic(pu1, pv1)
        s2 = split_statistic(pu2, pv2)
        mid = split_statistic((pu1 + pu2) / 2.0, (pv1 + pv2) / 2.0)
        min_end = min(min_end, rec.D - s1, rec.D - s2)
        min_mid = min(min_mid, mid - rec.D)
    return {
        "radius": float(radius),
        "n_draws": int(n_draws),
        "min_endpoint_margin": float(min_end),
        "min_midpoint_margin": float(min_mid),
        "all_strict": bool(min_end > 0.0 and min_mid > 0.0),
    }
