"""Multiple-request and device-to-device variants of the bound machinery.

Both variants reuse the single-request engine.  For l requests per user
the achievable rate is simply l times the base rate, and the inequality
family comes from doubling a saturated pair, so everything stays at the
formula level (no per-tree labeling is redone here).  The D2D setting
admits the identical lower bounds once the union of user broadcasts is
treated as the delivery signal; only the feasibility condition K*M >= N
is new.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Union

from .bounds import (
    Rational,
    SearchConfig,
    _as_fraction,
    _check_cache_size,
    _ratio,
    _upper_envelope,
    achievable_rate,
    m_grid_with_corners,
    proposed_bound,
)
from .errors import InfeasibleError, InputError
from .model import Inequality, SystemParams


@dataclass(frozen=True)
class MultiRequestParams:
    """Base system plus the number of files each user requests per round."""

    base: SystemParams
    requests_per_user: int

    def __post_init__(self):
        if self.requests_per_user < 1:
            raise InputError(
                f"requests_per_user must be >= 1, got {self.requests_per_user}"
            )


def multirequest_achievable(mr: MultiRequestParams, M: Rational) -> Fraction:
    """Serving l requests by repeating the base scheme: l * R_c(M)."""
    return mr.requests_per_user * achievable_rate(mr.base, M)


def _multirequest_nsat_upper(mr: MultiRequestParams, alpha: int, beta: int) -> int:
    """Upper bound on the l-request saturation number.

    Replicating the single-request construction l-fold gives
    l * floor((2ab + a + b)/3) for beta <= K; l*a*min(b, K) always works.
    """
    l = mr.requests_per_user
    K = mr.base.num_users
    candidates = [l * alpha * min(beta, K)]
    if beta <= K:
        candidates.append(l * ((2 * alpha * beta + alpha + beta) // 3))
    return min(candidates)


def multirequest_inequality(mr: MultiRequestParams, alpha: int, beta: int) -> Optional[Inequality]:
    """Doubled-pair inequality for l requests per user.

    alpha*R* + beta*M >= min(l*alpha*min(2*beta, K),
                             l*alpha*min(beta, K) + (N - N0)/2)
    for N >= N0, where N0 upper-bounds the l-request saturation number of
    (alpha, beta).  For 2*beta <= K the first term equals the customary
    2*l*alpha*min(beta, K); the min(2*beta, K) form is what the doubling
    argument actually yields and stays valid up to beta = K.  Returns
    None when N < N0.
    """
    if alpha < 1 or beta < 1:
        raise InputError("alpha and beta must be >= 1")
    N, K = mr.base.num_files, mr.base.num_users
    if beta > K:
        raise InputError(f"multirequest inequalities require beta <= K (got beta={beta})")
    l = mr.requests_per_user
    n0 = _multirequest_nsat_upper(mr, alpha, beta)
    if N < n0:
        return None
    bound = min(
        Fraction(l * alpha * min(2 * beta, K)),
        l * alpha * min(beta, K) + Fraction(N - n0, 2),
    )
    return Inequality(alpha, beta, bound, "proposed", None)


def _multirequest_inequalities(mr: MultiRequestParams,
                               alpha_max: Optional[int] = None,
                               beta_max: Optional[int] = None) -> list[Inequality]:
    N, K = mr.base.num_files, mr.base.num_users
    l = mr.requests_per_user
    alpha_max = alpha_max if alpha_max is not None else N
    beta_max = min(beta_max if beta_max is not None else K, K)
    out = []
    for alpha in range(1, alpha_max + 1):
        for beta in range(1, beta_max + 1):
            ineq = multirequest_inequality(mr, alpha, beta)
            if ineq is not None:
                out.append(ineq)
    # Covering inequality: ceil(N/l) delivery signals recover every file
    # against a single cache, so alpha*R* + M >= N at any cache size.
    alpha_cover = -(-N // l)
    out.append(Inequality(alpha_cover, 1, Fraction(N), "custom-instance", None))
    return out


def multirequest_lower_bound(mr: MultiRequestParams, M: Rational,
                             alpha_max: Optional[int] = None,
                             beta_max: Optional[int] = None) -> Fraction:
    """Best rate bound for the l-request system at cache size M, floored at 0."""
    m = _check_cache_size(mr.base, M)
    best = Fraction(0)
    for ineq in _multirequest_inequalities(mr, alpha_max, beta_max):
        best = max(best, ineq.value_at(m))
    return best


@dataclass(frozen=True)
class MultiRequestGapReport:
    """Worst achievable-to-bound ratio over a (params, l, M) sweep."""

    threshold: Fraction
    max_ratio: Union[Fraction, float]
    argmax: Optional[tuple[SystemParams, int, Fraction]]
    points_checked: int
    passed: bool


def multirequest_gap_verify(param_grid: Iterable[SystemParams],
                            l_values: Iterable[int],
                            m_grid=None,
                            threshold: Rational = 4) -> MultiRequestGapReport:
    """Check l*R_c(M) against the multirequest bound over a grid.

    ``m_grid`` defaults to the corner grid M = t*N/K; it may also be a
    callable params -> iterable, or a fixed iterable.
    """
    threshold = _as_fraction(threshold)
    if m_grid is None:
        grid_for = lambda p: [Fraction(t * p.num_files, p.num_users)
                              for t in range(p.num_users + 1)]
    elif callable(m_grid):
        grid_for = m_grid
    else:
        fixed = sorted({_as_fraction(m) for m in m_grid})
        grid_for = lambda p: fixed

    l_values = list(l_values)
    worst: Union[Fraction, float] = Fraction(0)
    worst_at = None
    points = 0
    for params in param_grid:
        for l in l_values:
            mr = MultiRequestParams(params, l)
            lines = [
                (Fraction(-i.beta, i.alpha), Fraction(i.bound, i.alpha))
                for i in _multirequest_inequalities(mr)
            ]
            lines.append((Fraction(0), Fraction(0)))
            hull, breaks = _upper_envelope(lines)

            for m in grid_for(params):
                m = _check_cache_size(params, m)
                idx = bisect.bisect_left(breaks, m)
                slope, intercept = hull[idx]
                bound = slope * m + intercept
                ratio = _ratio(multirequest_achievable(mr, m), bound)
                points += 1
                if ratio > worst:
                    worst, worst_at = ratio, (params, l, m)
    return MultiRequestGapReport(
        threshold=threshold,
        max_ratio=worst,
        argmax=worst_at,
        points_checked=points,
        passed=worst <= threshold,
    )


def d2d_bound(params: SystemParams, M: Rational,
              search: Optional[SearchConfig] = None) -> Fraction:
    """Lower bound for the serverless variant.

    Treating the union of the user broadcasts as the delivery signal
    makes every inequality of the main engine apply unchanged, so this
    delegates to the proposed bound; the setting is only feasible when
    the caches jointly hold the library, K*M >= N.
    """
    m = _check_cache_size(params, M)
    if params.num_users * m < params.num_files:
        raise InfeasibleError(
            f"infeasible cache size: K*M = {params.num_users * m} < N = {params.num_files}"
        )
    value, _ = proposed_bound(params, m, search)
    return value
