"""Tail likelihood-ratio diagnostics for the inadmissibility condition.

The single-split test is dominated whenever the second coordinate's shifted
density ratio f(x - theta)/f(x) escapes to infinity in the shift direction
while staying bounded in the opposite direction, for every shift on the
relevant side.  This module probes those limits numerically on a geometric
ladder and classifies the behaviour; limits are diagnosed, never proven.

Classification of the log-ratio sequence r_k = log f(x_k - theta) - log f(x_k)
on the ladder (deterministic in the probes):

  * diverges            r_last > log(1e6) and fitted slope > 0.01
                        (Gaussian-type tails: r grows linearly in |x|)
  * finite_limit(0)     r_last < -log(1e6) and fitted slope < -0.01
                        (the mirror case: the ratio collapses to zero)
  * finite_limit(v)     successive log-ratios differ by < 1e-4
                        (exponential tails flatten immediately; v = exp(r_last))
  * finite_limit(v)     successive differences shrink geometrically
                        (polynomial tails: r ~ L + c/|x|, so differences halve
                        per rung; v is the geometric-tail extrapolation)
  * inconclusive        anything else

The thresholds leave an order-of-magnitude margin for every built-in family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import DomainError, InputError, NumericalError
from .families import LocationFamily1D

__all__ = [
    "ConditionReport",
    "Classification",
    "ConditionVerdict",
    "tail_ratio_diagnostic",
    "check_inadmissibility_condition",
    "condition_to_claim",
    "DEFAULT_PROBE_EXPONENTS",
    "DEFAULT_THETA_PROBES",
]

DEFAULT_PROBE_EXPONENTS = range(4, 11)  # |x| in {2^4, ..., 2^10}
DEFAULT_THETA_PROBES = (0.5, 1.0, 2.0, -0.5, -1.0, -2.0)

_DIVERGE_LOG = math.log(1e6)
_SLOPE_MIN = 0.01
_FLAT_TOL = 1e-4
_GEO_RATIO_MAX = 0.75
_GEO_LAST_MAX = 0.05
_LOG_RATIO_CAP = 700.0  # exp beyond this overflows float64


@dataclass(frozen=True)
class Classification:
    label: str  # "diverges" | "finite_limit" | "inconclusive"
    value: float | None = None  # limit value when label == "finite_limit"


@dataclass(frozen=True)
class ConditionReport:
    family_id: str
    theta: float
    direction: str  # "+inf" | "-inf"
    probe_points: tuple[tuple[float, float], ...]  # (x, ratio) pairs
    log_ratios: tuple[float, ...]
    classification: Classification
    slope_estimate: float
    overflow_truncated: bool


def tail_ratio_diagnostic(
    family: LocationFamily1D,
    theta: float,
    direction: str,
    probe_grid: Sequence[float] | None = None,
) -> ConditionReport:
    """Probe f(x - theta)/f(x) along one tail and classify the limit behaviour.

    ``probe_grid`` defaults to the geometric ladder |x| in {2^4, ..., 2^10}
    signed by ``direction``.  Probes whose ratio would overflow float64 are
    dropped from the top of the ladder (flagged in the report); at least three
    probes must survive.
    """
    theta = float(theta)
    if theta == 0.0 or not math.isfinite(theta):
        raise DomainError(f"tail_ratio_diagnostic: theta must be nonzero finite, got {theta}")
    if direction not in ("+inf", "-inf"):
        raise InputError(f"direction must be '+inf' or '-inf', got {direction!r}")
    sign = 1.0 if direction == "+inf" else -1.0
    if probe_grid is None:
        probes = np.array([sign * 2.0 ** k for k in DEFAULT_PROBE_EXPONENTS])
    else:
        probes = np.asarray(probe_grid, dtype=float)
        if np.any(np.sign(probes) != sign):
            raise InputError("probe_grid must match the direction sign")
        if np.any(np.diff(np.abs(probes)) <= 0):
            raise InputError("probe_grid magnitudes must be increasing")

    log_r = np.asarray(
        family.log_density(probes - theta) - family.log_density(probes), dtype=float
    )
    if not np.all(np.isfinite(log_r)):
        raise NumericalError(
            f"{family.name}: log-density not finite at probes {probes.tolist()}"
        )

    truncated = False
    keep = np.abs(log_r) <= _LOG_RATIO_CAP
    if not np.all(keep):
        # Drop rungs from the first overflowing probe onward.
        first_bad = int(np.flatnonzero(~keep)[0])
        if first_bad < 3:
            raise NumericalError(
                f"{family.name}: ratio overflows within the first three probes"
            )
        probes = probes[:first_bad]
        log_r = log_r[:first_bad]
        truncated = True

    slope = float(np.polyfit(np.abs(probes), log_r, 1)[0])
    cls = _classify(log_r, slope)
    return ConditionReport(
        family_id=family.name,
        theta=theta,
        direction=direction,
        probe_points=tuple((float(x), float(np.exp(r))) for x, r in zip(probes, log_r)),
        log_ratios=tuple(float(r) for r in log_r),
        classification=cls,
        slope_estimate=slope,
        overflow_truncated=truncated,
    )


def _classify(log_r: np.ndarray, slope: float) -> Classification:
    r_last = float(log_r[-1])
    if r_last > _DIVERGE_LOG and slope > _SLOPE_MIN:
        return Classification("diverges")
    if r_last < -_DIVERGE_LOG and slope < -_SLOPE_MIN:
        return Classification("finite_limit", 0.0)
    diffs = np.diff(log_r)
    d_last = float(diffs[-1])
    if abs(d_last) < _FLAT_TOL:
        return Classification("finite_limit", float(np.exp(r_last)))
    if len(diffs) >= 3:
        d3 = diffs[-3:]
        if np.all(np.abs(d3) > 0.0):
            q1 = abs(d3[1] / d3[0])
            q2 = abs(d3[2] / d3[1])
            if q1 <= _GEO_RATIO_MAX and q2 <= _GEO_RATIO_MAX and abs(d_last) < _GEO_LAST_MAX:
                # Geometric tail sum: remaining change is d_last * q/(1-q).
                q = min(q2, 0.9)
                limit = r_last + d_last * q / (1.0 - q)
                return Classification("finite_limit", float(np.exp(limit)))
    return Classification("inconclusive")


# ---------------------------------------------------------------------------
# Condition verdict over a probe set
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionVerdict:
    """Verdict for one family pair over a set of shift probes.

    ``evidence_satisfied``: every probed shift shows the required divergence
    in its own direction and a finite limit in the opposite one.
    ``violated``: at least one probe contradicts a requirement.
    ``inconclusive``: no contradiction, but some probe did not classify.
    """

    verdict: str
    sub_reports: tuple[ConditionReport, ...]
    family_id: str


def check_inadmissibility_condition(
    family_pair, theta_probes: Sequence[float] = DEFAULT_THETA_PROBES
) -> ConditionVerdict:
    """Diagnose the tail-dominance condition on the second coordinate's family.

    For a positive shift the ratio must diverge at +inf and stay finite at
    -inf; for a negative shift the roles swap.  Positivity, boundedness and
    continuity of both densities are construction invariants of
    :class:`LocationFamily1D` and are not re-checked here.
    """
    f2 = family_pair[1] if isinstance(family_pair, (tuple, list)) else family_pair
    probes = [float(t) for t in theta_probes]
    if not any(t > 0 for t in probes) or not any(t < 0 for t in probes):
        raise InputError("theta_probes must contain positive and negative shifts")

    reports = []
    contradiction = False
    all_conclusive = True
    for theta in probes:
        for direction in ("+inf", "-inf"):
            rep = tail_ratio_diagnostic(f2, theta, direction)
            reports.append(rep)
            needs_divergence = (theta > 0) == (direction == "+inf")
            label = rep.classification.label
            if label == "inconclusive":
                all_conclusive = False
            elif needs_divergence and label == "finite_limit":
                contradiction = True
            elif not needs_divergence and label == "diverges":
                contradiction = True

    if contradiction:
        verdict = "violated"
    elif all_conclusive:
        satisfied = all(
            (rep.classification.label == "diverges")
            == ((rep.theta > 0) == (rep.direction == "+inf"))
            for rep in reports
        )
        verdict = "evidence_satisfied" if satisfied else "violated"
    else:
        verdict = "inconclusive"
    return ConditionVerdict(
        verdict=verdict, sub_reports=tuple(reports), family_id=f2.name
    )


def condition_to_claim(family_pair, verdict: ConditionVerdict) -> dict:
    """Turn a verdict into a machine-readable claim record.

    The tail condition is sufficient, not necessary: a violated or
    inconclusive verdict yields a no-conclusion record, never an
    admissibility claim.
    """
    f1 = family_pair[0] if isinstance(family_pair, (tuple, list)) else family_pair
    f2 = family_pair[1] if isinstance(family_pair, (tuple, list)) else family_pair
    if verdict.verdict == "evidence_satisfied":
        claim = "single_split_test_inadmissible"
        detail = (
            "tail-ratio condition holds at every probe: a regular test with "
            "strictly better mixture power exists, so the single-split test "
            "is not regularly admissible for this family pair"
        )
    elif verdict.verdict == "violated":
        claim = "no_conclusion"
        detail = (
            "tail-ratio condition fails at some probe; the condition is "
            "sufficient, not necessary, so no admissibility conclusion follows"
        )
    else:
        claim = "no_conclusion"
        detail = "diagnostics inconclusive at some probe; no conclusion"
    return {
        "family1": f1.name,
        "family2": f2.name,
        "verdict": verdict.verdict,
        "claim": claim,
        "detail": detail,
        "n_probes": len(verdict.sub_reports),
    }
