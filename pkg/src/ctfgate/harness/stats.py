"""Self-contained statistics for benchmark reporting.

Everything here is implemented from first principles on purpose: the
report pipeline must not pull in a numerics stack just to compute a
handful of closed-form tests. p-values come from the regularized
incomplete gamma function (series expansion below a+1, Lentz continued
fraction above), good to well under 1e-8 over the ranges these tests
produce.

Provided: Wilson score intervals for success rates, Pearson's
chi-squared test of independence for success-count tables, the
Kruskal-Wallis H test (tie corrected) for step-count comparisons,
Cohen's d for effect sizes, and the reward check that decides whether
a trial actually captured its flag.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Any, Sequence

MAX_GAMMA_ITERATIONS = 600
GAMMA_EPS = 1e-15


class DomainError(ValueError):
    """Inputs outside the statistic's domain (empty groups, negative
    counts, degenerate variance)."""


# --------------------------------------------------------------------------
# Regularized incomplete gamma


def _lower_gamma_series(a: float, x: float) -> float:
    # P(a, x) via the power series; converges fast for x < a + 1.
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(MAX_GAMMA_ITERATIONS):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * GAMMA_EPS:
            break
    else:
        raise DomainError(f"gamma series failed to converge for a={a}, x={x}")
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_gamma_cf(a: float, x: float) -> float:
    # Q(a, x) via modified Lentz continued fraction; for x >= a + 1.
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b if b != 0 else 1.0 / tiny
    h = d
    for i in range(1, MAX_GAMMA_ITERATIONS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < GAMMA_EPS:
            break
    else:
        raise DomainError(f"gamma continued fraction failed for a={a}, x={x}")
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if a <= 0:
        raise DomainError(f"shape parameter must be positive, got {a}")
    if x < 0:
        raise DomainError(f"x must be nonnegative, got {x}")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _lower_gamma_series(a, x)
    return _upper_gamma_cf(a, x)


def chi_square_sf(statistic: float, df: int) -> float:
    """Survival function of the chi-squared distribution."""
    if df < 1:
        raise DomainError(f"degrees of freedom must be >= 1, got {df}")
    if statistic < 0:
        raise DomainError(f"chi-squared statistic must be nonnegative, got {statistic}")
    return regularized_gamma_q(df / 2.0, statistic / 2.0)


# --------------------------------------------------------------------------
# Interval and tests


def wilson_interval(
    successes: int, trials: int, z: float = 1.96
) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion, clamped to the
    unit interval (the closed form can stray past it by an ulp at the
    boundaries)."""
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if not 0 <= successes <= trials:
        raise DomainError(f"successes {successes} outside [0, {trials}]")
    if z <= 0:
        raise DomainError(f"z must be positive, got {z}")
    p = successes / trials
    z2 = z * z
    center = p + z2 / (2 * trials)
    spread = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials))
    denom = 1.0 + z2 / trials
    low = (center - spread) / denom
    high = (center + spread) / denom
    return (min(max(low, 0.0), 1.0), min(max(high, 0.0), 1.0))


def chi_square_independence(
    table: Sequence[Sequence[float]],
) -> tuple[float, float]:
    """Pearson's chi-squared test of independence on an r x c count
    table.  Returns (statistic, p_value) with df = (r-1)(c-1)."""
    rows = len(table)
    if rows < 2:
        raise DomainError("need at least two rows")
    cols = len(table[0])
    if cols < 2:
        raise DomainError("need at least two columns")
    for row in table:
        if len(row) != cols:
            raise DomainError("table rows must have equal length")
        for cell in row:
            if cell < 0:
                raise DomainError(f"counts must be nonnegative, got {cell}")
    row_sums = [sum(row) for row in table]
    col_sums = [sum(table[r][c] for r in range(rows)) for c in range(cols)]
    total = sum(row_sums)
    if total <= 0:
        raise DomainError("table total must be positive")
    if any(s == 0 for s in row_sums) or any(s == 0 for s in col_sums):
        raise DomainError("zero marginal makes expected counts degenerate")
    statistic = 0.0
    for r in range(rows):
        for c in range(cols):
            expected = row_sums[r] * col_sums[c] / total
            diff = table[r][c] - expected
            statistic += diff * diff / expected
    df = (rows - 1) * (cols - 1)
    return statistic, chi_square_sf(statistic, df)


def _rank_with_ties(values: Sequence[float]) -> tuple[list[float], float]:
    """Midranks plus the Kruskal-Wallis tie correction term
    sum(t^3 - t) over tie groups."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    tie_term = 0.0
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        # Positions i..j share a value; assign the average rank.
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        t = j - i + 1
        tie_term += t * t * t - t
        i = j + 1
    return ranks, tie_term


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> tuple[float, float]:
    """Kruskal-Wallis H test across two or more groups.  Returns the
    tie-corrected (H, p_value); df = groups - 1."""
    if len(groups) < 2:
        raise DomainError("need at least two groups")
    for g in groups:
        if len(g) == 0:
            raise DomainError("groups must be nonempty")
    pooled: list[float] = [float(v) for g in groups for v in g]
    n = len(pooled)
    if n < 3:
        raise DomainError("need at least three observations overall")
    ranks, tie_term = _rank_with_ties(pooled)
    correction = 1.0 - tie_term / (n * n * n - n)
    if correction <= 0:
        raise DomainError("all observations identical; ranks are degenerate")
    h = 0.0
    offset = 0
    for g in groups:
        size = len(g)
        rank_sum = sum(ranks[offset : offset + size])
        h += rank_sum * rank_sum / size
        offset += size
    h = (12.0 / (n * (n + 1))) * h - 3.0 * (n + 1)
    h /= correction
    return h, chi_square_sf(h, len(groups) - 1)


def cohens_d(a: Sequence[float], b: Sequence[float]) -> float:
    """Cohen's d with the pooled sample standard deviation."""
    if len(a) < 2 or len(b) < 2:
        raise DomainError("each sample needs at least two observations")
    mean_a = sum(a) / len(a)
    mean_b = sum(b) / len(b)
    var_a = sum((v - mean_a) ** 2 for v in a) / (len(a) - 1)
    var_b = sum((v - mean_b) ** 2 for v in b) / (len(b) - 1)
    pooled = ((len(a) - 1) * var_a + (len(b) - 1) * var_b) / (len(a) + len(b) - 2)
    if pooled <= 0:
        raise DomainError("pooled variance is zero; d is undefined")
    return (mean_a - mean_b) / math.sqrt(pooled)


# --------------------------------------------------------------------------
# Reward


@dataclass(frozen=True)
class RewardCheck:
    """Outcome of re-deriving the binary reward from the evidence."""

    rewarded: bool
    flag: str | None
    source: str | None


def _string_leaves(value: Any) -> list[str]:
    if isinstance(value, str):
        return [value]
    if isinstance(value, dict):
        out = []
        for v in value.values():
            out.extend(_string_leaves(v))
        return out
    if isinstance(value, (list, tuple)):
        out = []
        for v in value:
            out.extend(_string_leaves(v))
        return out
    return []


def check_reward(
    flag_pattern: str,
    stop_kind: str | None,
    stop_detail: str | None,
    observations: Sequence[dict[str, Any]],
) -> RewardCheck:
    """Independent reward audit: reward is 1 only when the episode
    stopped on flag capture AND the claimed flag matches the pattern
    AND some recorded observation actually contains it.  A claim with
    no supporting evidence scores 0."""
    pattern = re.compile(flag_pattern)
    if stop_kind != "flag-captured" or not stop_detail:
        return RewardCheck(rewarded=False, flag=None, source=None)
    if not pattern.search(stop_detail):
        return RewardCheck(rewarded=False, flag=None, source=None)
    for idx, obs in enumerate(observations):
        for leaf in _string_leaves(obs):
            if stop_detail in leaf or pattern.search(leaf):
                return RewardCheck(
                    rewarded=True, flag=stop_detail, source=f"observation[{idx}]"
                )
    return RewardCheck(rewarded=False, flag=stop_detail, source=None)
