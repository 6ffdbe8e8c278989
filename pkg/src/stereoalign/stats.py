"""Success-rate statistics: Wilson score intervals and paired differences.

Wilson (not the normal approximation) because cells near 0% and 100% occur
routinely in the ablation matrix.
"""

from __future__ import annotations

import math

Z_95 = 1.959963984540054  # two-sided 95% normal quantile


class InvalidCounts(ValueError):
    pass


def success_rate_ci(successes: int, trials: int, z: float = Z_95) -> tuple[float, float, float]:
    """(rate, lower, upper) with a 95% Wilson score interval."""
    if trials < 1 or not (0 <= successes <= trials):
        raise InvalidCounts(f"bad counts: {successes}/{trials}")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom
    # At p-hat of 0 or 1 the score bound hits the endpoint exactly; pin it
    # rather than leaving float residue.
    lower = 0.0 if successes == 0 else max(0.0, center - half)
    upper = 1.0 if successes == trials else min(1.0, center + half)
    return p, lower, upper


def rate_difference_ci(
    successes_a: int, trials_a: int, successes_b: int, trials_b: int
) -> tuple[float, float, float]:
    """(difference a-b, lower, upper), Newcombe's score interval for p_a - p_b."""
    p_a, lo_a, hi_a = success_rate_ci(successes_a, trials_a)
    p_b, lo_b, hi_b = success_rate_ci(successes_b, trials_b)
    diff = p_a - p_b
    lower = diff - math.sqrt((p_a - lo_a) ** 2 + (hi_b - p_b) ** 2)
    upper = diff + math.sqrt((hi_a - p_a) ** 2 + (p_b - lo_b) ** 2)
    return diff, max(-1.0, lower), min(1.0, upper)
