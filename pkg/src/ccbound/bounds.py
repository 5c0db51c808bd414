"""Closed-form rates, lower bounds on R*(M), and the multiplicative-gap verifier.

Everything is exact rational arithmetic; no floats enter any comparison.
The central object is the inequality ``alpha*R* + beta*M >= L``: the
search assembles a family of them (saturated pairs, split pairs via the
saturation-number machinery, and the classical cutset pairs) and the
bound at a given M is the best implied rate ``(L - beta*M)/alpha``,
floored at zero.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Optional, Union

from .errors import InputError
from .model import Inequality, RatePoint, SystemParams
from .saturation import nsat_upper_best

Rational = Union[int, Fraction, str]

# Re-exported for callers assembling rate tables.
__all__ = [
    "Inequality",
    "RatePoint",
    "SearchConfig",
    "GapReport",
    "uncoded_rate",
    "achievable_rate",
    "cutset_bound",
    "proposed_inequality",
    "proposed_bound",
    "han_bound",
    "cdb_bound",
    "cdb_family_parameters",
    "CdbFamilyParams",
    "gap",
    "m_grid_with_corners",
    "verify_gap_le_4",
]


def _as_fraction(value: Rational) -> Fraction:
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise InputError(f"not a rational number: {value!r}") from exc


def _check_cache_size(params: SystemParams, M: Rational) -> Fraction:
    m = _as_fraction(M)
    if m < 0 or m > params.num_files:
        raise InputError(
            f"cache size {m} outside [0, {params.num_files}]"
        )
    return m


# ---------------------------------------------------------------------------
# Rates
# ---------------------------------------------------------------------------


def uncoded_rate(params: SystemParams, M: Rational) -> Fraction:
    """Rate of plain fractional caching: min(N, K) * (1 - M/N)."""
    m = _check_cache_size(params, M)
    N, K = params.num_files, params.num_users
    return min(N, K) * (1 - Fraction(m, N))


def achievable_rate(params: SystemParams, M: Rational) -> Fraction:
    """Best known achievable delivery rate.

    At the corner points M = t*N/K the rate is
    K*(1 - M/N) * min(1/(1 + K*M/N), N/K); between corners the schemes
    time-share, so the value is the linear interpolation between the two
    bracketing corners.
    """
    m = _check_cache_size(params, M)
    N, K = params.num_files, params.num_users

    def corner(t: int) -> Fraction:
        return (K - t) * min(Fraction(1, 1 + t), Fraction(N, K))

    t = (m * K) // N
    if t >= K:
        return Fraction(0)
    m_lo = Fraction(t * N, K)
    m_hi = Fraction((t + 1) * N, K)
    r_lo, r_hi = corner(t), corner(t + 1)
    return r_lo + (r_hi - r_lo) * (m - m_lo) / (m_hi - m_lo)


def cutset_bound(params: SystemParams, M: Rational) -> Fraction:
    """Classical converse: max over s of s - s*M/floor(N/s), floored at 0."""
    m = _check_cache_size(params, M)
    N, K = params.num_files, params.num_users
    best = Fraction(0)
    for s in range(1, min(N, K) + 1):
        best = max(best, s - Fraction(s, N // s) * m)
    return best


# ---------------------------------------------------------------------------
# The proposed inequality family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SearchConfig:
    """Ranges and options for the inequality search.

    ``alpha_max`` defaults to N.  ``beta_max`` defaults to 2K: pairs with
    K < beta <= 2K arise from doubling a saturated pair and do improve on
    the cutset bound (beta > 2K never helps, both split halves already
    cap at K).  The default split is the balanced one; full enumeration
    tries every (alpha_l, beta_l) at higher cost.
    """

    alpha_max: Optional[int] = None
    beta_max: Optional[int] = None
    full_split_enumeration: bool = False
    include_cutset_pairs: bool = True


DEFAULT_SEARCH = SearchConfig()


def balanced_split(alpha: int, beta: int) -> tuple[int, int]:
    """The split used throughout: ceil on the delivery side, floor on the cache side."""
    return ((alpha + 1) // 2, beta // 2)


def proposed_inequality(params: SystemParams, alpha: int, beta: int,
                        split: Optional[tuple[int, int]] = None) -> Optional[Inequality]:
    """Best inequality on alpha*R* + beta*M from saturated subinstances.

    With a split (alpha_l, beta_l), both halves are taken saturated and
    joined: L = min(alpha*min(beta,K), L_l + L_r + N - N0) where N0 is
    the larger of the halves' saturation-number upper bounds; available
    only when N >= N0.  Whenever N covers the whole pair's saturation
    number, the unsplit saturated inequality L = alpha*min(beta,K) is
    also available and wins ties.  Returns None when no variant applies.
    """
    if alpha < 1 or beta < 1:
        raise InputError("alpha and beta must be >= 1")
    N, K = params.num_files, params.num_users

    unsplit: Optional[int] = None
    if N >= nsat_upper_best(alpha, beta, K):
        unsplit = alpha * min(beta, K)

    split_bound: Optional[int] = None
    if split is not None:
        alpha_l, beta_l = split
        if not (1 <= alpha_l < alpha) or not (0 <= beta_l <= beta):
            raise InputError(f"malformed split {split!r} for (alpha={alpha}, beta={beta})")
        alpha_r, beta_r = alpha - alpha_l, beta - beta_l
        n0 = max(nsat_upper_best(alpha_l, beta_l, K), nsat_upper_best(alpha_r, beta_r, K))
        if N >= n0:
            joined = alpha_l * min(beta_l, K) + alpha_r * min(beta_r, K) + N - n0
            split_bound = min(alpha * min(beta, K), joined)

    if unsplit is None and split_bound is None:
        return None
    if split_bound is None or (unsplit is not None and unsplit >= split_bound):
        return Inequality(alpha, beta, Fraction(unsplit), "proposed", None)
    return Inequality(alpha, beta, Fraction(split_bound), "proposed", split)


def _pair_inequality(params: SystemParams, alpha: int, beta: int,
                     config: SearchConfig) -> Optional[Inequality]:
    if not config.full_split_enumeration or alpha < 2:
        split = balanced_split(alpha, beta) if alpha >= 2 else None
        return proposed_inequality(params, alpha, beta, split)
    best = proposed_inequality(params, alpha, beta, None)
    for alpha_l in range(1, alpha):
        for beta_l in range(0, beta + 1):
            candidate = proposed_inequality(params, alpha, beta, (alpha_l, beta_l))
            if candidate is not None and (best is None or candidate.bound > best.bound):
                best = candidate
    return best


@lru_cache(maxsize=8192)
def _enumerate_inequalities(params: SystemParams, config: SearchConfig) -> tuple[Inequality, ...]:
    N, K = params.num_files, params.num_users
    alpha_max = config.alpha_max if config.alpha_max is not None else N
    beta_max = config.beta_max if config.beta_max is not None else 2 * K
    out: list[Inequality] = []
    for alpha in range(1, alpha_max + 1):
        for beta in range(1, beta_max + 1):
            ineq = _pair_inequality(params, alpha, beta, config)
            if ineq is not None:
                out.append(ineq)
    if config.include_cutset_pairs:
        for s in range(1, min(N, K) + 1):
            alpha = N // s
            out.append(Inequality(alpha, s, Fraction(alpha * s), "cutset", None))
    return tuple(out)


def _argmax_key(ineq: Inequality) -> tuple:
    return (ineq.alpha, ineq.beta, ineq.split if ineq.split is not None else (-1, -1),
            ineq.provenance)


def proposed_bound(params: SystemParams, M: Rational,
                   search: Optional[SearchConfig] = None) -> tuple[Fraction, Inequality]:
    """Best rate bound over the searched inequality family, with its witness.

    Returns (value, inequality); the value is floored at zero and ties in
    the arg-max break lexicographically on (alpha, beta, split).  Always
    at least the cutset bound when cutset pairs are included.
    """
    m = _check_cache_size(params, M)
    config = search if search is not None else DEFAULT_SEARCH
    inequalities = _enumerate_inequalities(params, config)
    if not inequalities:
        raise InputError("inequality search space is empty; widen the search config")
    best_value: Optional[Fraction] = None
    best: Optional[Inequality] = None
    for ineq in inequalities:
        value = ineq.value_at(m)
        if (
            best_value is None
            or value > best_value
            or (value == best_value and _argmax_key(ineq) < _argmax_key(best))
        ):
            best_value, best = value, ineq
    return max(Fraction(0), best_value), best


def bound_value_function(params: SystemParams,
                         search: Optional[SearchConfig] = None) -> Callable[[Fraction], Fraction]:
    """Fast repeated evaluation of the proposed bound (values only).

    Precomputes the upper envelope of the lines M -> (L - beta*M)/alpha
    once; each call is then a binary search.  Used by the sweep and gap
    verifiers.
    """
    config = search if search is not None else DEFAULT_SEARCH
    inequalities = _enumerate_inequalities(params, config)
    lines = [(Fraction(-i.beta, i.alpha), Fraction(i.bound, i.alpha)) for i in inequalities]
    lines.append((Fraction(0), Fraction(0)))  # the floor at zero
    hull, breaks = _upper_envelope(lines)

    def evaluate(M: Fraction) -> Fraction:
        idx = bisect.bisect_left(breaks, M)
        slope, intercept = hull[idx]
        return slope * M + intercept

    return evaluate


def _upper_envelope(lines: Iterable[tuple[Fraction, Fraction]]):
    """Upper envelope of lines (slope, intercept); returns (hull, breakpoints)."""
    best_by_slope: dict[Fraction, Fraction] = {}
    for slope, intercept in lines:
        if slope not in best_by_slope or intercept > best_by_slope[slope]:
            best_by_slope[slope] = intercept
    ordered = sorted(best_by_slope.items())
    hull: list[tuple[Fraction, Fraction]] = []
    for slope, intercept in ordered:
        while len(hull) >= 2:
            s1, b1 = hull[-2]
            s2, b2 = hull[-1]
            # middle line is useless if the new line overtakes the first
            # one no later than the middle one does
            if (b1 - intercept) * (s2 - s1) <= (b1 - b2) * (slope - s1):
                hull.pop()
            else:
                break
        hull.append((slope, intercept))
    breaks = [
        Fraction(b1 - b2, s2 - s1)
        for (s1, b1), (s2, b2) in zip(hull, hull[1:])
    ]
    return hull, breaks


# ---------------------------------------------------------------------------
# Comparison bounds
# ---------------------------------------------------------------------------


def han_bound(params: SystemParams, M: Rational) -> Fraction:
    """Lower bound from the entropy-subset inequality family.

    max over beta in [1..K], alpha in [1..ceil(N/beta)] of
    (N - mu/(mu+beta)*[N-alpha*beta]+ - [N-alpha*K]+ - beta*M) / alpha
    with mu = min(ceil((N-alpha*beta)/alpha), K-beta); floored at 0.
    """
    m = _check_cache_size(params, M)
    N, K = params.num_files, params.num_users
    best = Fraction(0)
    for beta in range(1, K + 1):
        alpha_cap = -(-N // beta)
        for alpha in range(1, alpha_cap + 1):
            slack = N - alpha * beta
            if slack > 0:
                mu = min(-(-slack // alpha), K - beta)
                term = Fraction(mu * slack, mu + beta)
            else:
                term = Fraction(0)
            overshoot = max(0, N - alpha * K)
            best = max(best, Fraction(N - overshoot - beta * m - term, alpha))
    return best


@dataclass(frozen=True)
class CdbFamilyParams:
    """Internal values of one inequality family of the cascaded-demand bound."""

    t: int
    rate_coeff: int
    cache_coeff: int
    n: int
    gamma: int
    m: int
    n0_tilde: int
    bound: int


def cdb_family_parameters(params: SystemParams, t: int) -> tuple[CdbFamilyParams, ...]:
    """Both inequality families for one value of t (skipping degenerate m <= 0).

    n is the smallest integer with 3*t*n^2 - t*n >= N - t (an integer
    restatement of the closed-form root, avoiding any square-root
    rounding); m = n - gamma with the family-specific gamma.
    """
    N, K = params.num_files, params.num_users
    if not 1 <= t <= N:
        raise InputError(f"t must lie in [1..{N}], got {t}")
    n = 1
    while 3 * t * n * n - t * n < N - t:
        n += 1

    def family(rate_is_small: bool) -> Optional[CdbFamilyParams]:
        gamma = max(0, n - (K // (2 * t) if rate_is_small else K // 2))
        m = n - gamma
        if m < 1:
            return None
        n0_tilde = t * (m * m - m + 1)
        bound = min(4 * t * m * m, 2 * t * m * m + N - n0_tilde)
        rate_coeff, cache_coeff = (2 * m, 2 * t * m) if rate_is_small else (2 * t * m, 2 * m)
        return CdbFamilyParams(t, rate_coeff, cache_coeff, n, gamma, m, n0_tilde, bound)

    families = []
    if K >= 2:
        fam = family(rate_is_small=True)
        if fam is not None:
            families.append(fam)
    if K >= 2 * t:
        fam = family(rate_is_small=False)
        if fam is not None:
            families.append(fam)
    return tuple(families)


def cdb_bound(params: SystemParams, M: Rational) -> Fraction:
    """Lower bound from the cascaded-demand construction, both families, floored at 0."""
    m = _check_cache_size(params, M)
    N = params.num_files
    best = Fraction(0)
    for t in range(1, N + 1):
        for fam in cdb_family_parameters(params, t):
            best = max(best, Fraction(fam.bound - fam.cache_coeff * m, fam.rate_coeff))
    return best


# ---------------------------------------------------------------------------
# Gap verification
# ---------------------------------------------------------------------------


def gap(params: SystemParams, M: Rational,
        search: Optional[SearchConfig] = None) -> Union[Fraction, float]:
    """Ratio of the achievable rate to the proposed bound.

    Returns 1 when both are zero (M = N); returns float('inf') when the
    bound is zero but the rate is not, which signals a search range too
    small rather than a violated theorem.
    """
    m = _check_cache_size(params, M)
    rate = achievable_rate(params, m)
    bound, _ = proposed_bound(params, m, search)
    return _ratio(rate, bound)


def _ratio(rate: Fraction, bound: Fraction) -> Union[Fraction, float]:
    if bound == 0:
        return Fraction(1) if rate == 0 else float("inf")
    return rate / bound


def m_grid_with_corners(params: SystemParams, points: int) -> list[Fraction]:
    """Ascending grid of `points` evenly spaced M values plus all corners t*N/K."""
    if points < 2:
        raise InputError("an M grid needs at least 2 points")
    N, K = params.num_files, params.num_users
    grid = {Fraction(i * N, points - 1) for i in range(points)}
    grid.update(Fraction(t * N, K) for t in range(K + 1))
    return sorted(grid)


@dataclass(frozen=True)
class GapReport:
    """Outcome of a gap sweep: worst ratio, where it happened, pass/fail."""

    threshold: Fraction
    max_gap: Union[Fraction, float]
    argmax: Optional[tuple[SystemParams, Fraction]]
    max_gap_upper_half: Union[Fraction, float]
    argmax_upper_half: Optional[tuple[SystemParams, Fraction]]
    points_checked: int
    passed: bool


def verify_gap_le_4(param_grid: Iterable[SystemParams],
                    m_grid=None,
                    search: Optional[SearchConfig] = None,
                    threshold: Rational = 4) -> GapReport:
    """Evaluate the gap on every grid point and compare against the threshold.

    ``m_grid`` may be None (25 evenly spaced points plus all corners, per
    parameter set), a callable params -> iterable of M values, or a fixed
    iterable of M values.  The report also tracks the worst ratio over
    the upper half M in (N/2, N], where the gap should not exceed 2.
    """
    threshold = _as_fraction(threshold)
    if m_grid is None:
        grid_for = lambda p: m_grid_with_corners(p, 25)
    elif callable(m_grid):
        grid_for = m_grid
    else:
        fixed = sorted({_as_fraction(m) for m in m_grid})
        grid_for = lambda p: fixed

    worst: Union[Fraction, float] = Fraction(0)
    worst_at = None
    worst_upper: Union[Fraction, float] = Fraction(0)
    worst_upper_at = None
    points = 0
    for params in param_grid:
        evaluate = bound_value_function(params, search)
        half = Fraction(params.num_files, 2)
        for m in grid_for(params):
            m = _check_cache_size(params, m)
            ratio = _ratio(achievable_rate(params, m), evaluate(m))
            points += 1
            if ratio > worst:
                worst, worst_at = ratio, (params, m)
            if m > half and ratio > worst_upper:
                worst_upper, worst_upper_at = ratio, (params, m)
    return GapReport(
        threshold=threshold,
        max_gap=worst,
        argmax=worst_at,
        max_gap_upper_half=worst_upper,
        argmax_upper_half=worst_upper_at,
        points_checked=points,
        passed=worst <= threshold,
    )
