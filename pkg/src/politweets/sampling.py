"""Labelled-pool construction: monthly histograms, quota apportionment, draws.

The unbiased mode mimics the corpus's monthly tweet distribution via
largest-remainder (Hamilton) apportionment.  The two biased modes exist for
the overfitting experiment: they force at least a configurable share of the
sample (default 50%) into k randomly chosen months or onto k randomly chosen
deputies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .corpus import Label, Tweet
from .io_utils import ToolError


class SampleMode(Enum):
    UNBIASED = "unbiased"
    BIASED_MONTHS = "biased-months"
    BIASED_DEPUTIES = "biased-deputies"


@dataclass
class SamplePlan:
    per_class_size: int
    quotas: dict[str, int]  # month -> per-class count, sums to per_class_size
    mode: SampleMode
    seed: int
    bias_months_k: int = 3
    bias_deputies_k: int = 10
    concentration: float = 0.5


@dataclass
class SampleDraw:
    ids_by_class: dict[Label | None, list[str]]
    chosen_months: list[str]
    chosen_deputies: list[str]
    warnings: list[str] = field(default_factory=list)


def month_span(first: str, last: str) -> list[str]:
    """All calendar months from first to last inclusive, as YYYY-MM strings."""
    fy, fm = int(first[:4]), int(first[5:7])
    ly, lm = int(last[:4]), int(last[5:7])
    if (fy, fm) > (ly, lm):
        raise ValueError(f"month range reversed: {first} > {last}")
    months = []
    y, m = fy, fm
    while (y, m) <= (ly, lm):
        months.append(f"{y:04d}-{m:02d}")
        m += 1
        if m == 13:
            y, m = y + 1, 1
    return months


def monthly_histogram(tweets: Sequence[Tweet]) -> dict[str, int]:
    """Tweet count per calendar month; empty months inside the span get 0."""
    if not tweets:
        raise ToolError("cannot build a monthly histogram from an empty corpus")
    counts: dict[str, int] = {}
    for tweet in tweets:
        counts[tweet.month] = counts.get(tweet.month, 0) + 1
    months = month_span(min(counts), max(counts))
    return {m: counts.get(m, 0) for m in months}


def proportional_quotas(hist: dict[str, int], n: int) -> dict[str, int]:
    """Largest-remainder apportionment of n over the histogram's months.

    Guarantees sum(quotas) == n and |quota_m - n * share_m| < 1 for every
    month.  Remainder ties are broken by lexicographic month order.
    """
    total = sum(hist.values())
    if n < 1:
        raise ToolError(f"sample size must be >= 1, got {n}")
    if n > total:
        raise ToolError(f"sample size {n} exceeds corpus size {total}")
    months = sorted(hist)
    shares = {m: n * hist[m] / total for m in months}
    quotas = {m: math.floor(shares[m]) for m in months}
    leftover = n - sum(quotas.values())
    by_remainder = sorted(months, key=lambda m: (-(shares[m] - quotas[m]), m))
    for m in by_remainder[:leftover]:
        quotas[m] += 1
    return quotas


def rebalance_quotas(
    quotas: dict[str, int], capacity: dict[str, int]
) -> tuple[dict[str, int], list[str]]:
    """Cap quotas at per-month capacity, spilling deficits to months with room.

    Spill goes to the month with the largest remaining capacity (lexicographic
    tie-break).  Raises if the total capacity cannot absorb the quota sum.
    """
    out = dict(quotas)
    warnings: list[str] = []
    total = sum(out.values())
    if total > sum(capacity.get(m, 0) for m in out):
        raise ToolError(
            f"quota total {total} exceeds available pool "
            f"{sum(capacity.get(m, 0) for m in out)}"
        )
    overfull = [m for m in sorted(out) if out[m] > capacity.get(m, 0)]
    for m in overfull:
        deficit = out[m] - capacity.get(m, 0)
        out[m] = capacity.get(m, 0)
        warnings.append(f"month {m}: short by {deficit}, spilled to other months")
        while deficit > 0:
            spare = {k: capacity.get(k, 0) - out[k] for k in out}
            target = max(sorted(spare), key=lambda k: spare[k])
            if spare[target] <= 0:
                raise ToolError("no capacity left while spilling quotas")
            take = min(deficit, spare[target])
            out[target] += take
            deficit -= take
    return out, warnings


def make_plan(
    hist: dict[str, int],
    size: int,
    mode: SampleMode,
    seed: int,
    bias_months_k: int = 3,
    bias_deputies_k: int = 10,
    concentration: float = 0.5,
) -> SamplePlan:
    """Build a plan for a total sample of `size` tweets (half per class)."""
    if size % 2 != 0:
        raise ToolError(f"total sample size must be even, got {size}")
    per_class = size // 2
    return SamplePlan(
        per_class_size=per_class,
        quotas=proportional_quotas(hist, per_class),
        mode=mode,
        seed=seed,
        bias_months_k=bias_months_k,
        bias_deputies_k=bias_deputies_k,
        concentration=concentration,
    )


def _pools_by_class(
    tweets: Sequence[Tweet],
) -> dict[Label | None, list[Tweet]]:
    """Split candidates per manual label; unlabeled corpora get a single pool."""
    labeled = [t for t in tweets if t.label is not None]
    if not labeled:
        return {None: list(tweets)}
    if len(labeled) != len(tweets):
        raise ToolError("corpus mixes labeled and unlabeled tweets; split it first")
    pools: dict[Label | None, list[Tweet]] = {Label.POLITICAL: [], Label.NON_POLITICAL: []}
    for t in tweets:
        pools[t.label].append(t)
    return pools


def _sorted_ids_by_month(pool: Iterable[Tweet]) -> dict[str, list[str]]:
    by_month: dict[str, list[tuple]] = {}
    for t in pool:
        by_month.setdefault(t.month, []).append((t.posted_at, t.id))
    return {m: [tid for _, tid in sorted(v)] for m, v in by_month.items()}


def _draw_monthly(
    rng: np.random.Generator,
    ids_by_month: dict[str, list[str]],
    quotas: dict[str, int],
) -> list[str]:
    drawn: list[str] = []
    for month in sorted(quotas):
        want = quotas[month]
        if want == 0:
            continue
        pool = ids_by_month.get(month, [])
        picks = rng.choice(len(pool), size=want, replace=False)
        drawn.extend(pool[i] for i in sorted(picks))
    return drawn


def draw_sample(tweets: Sequence[Tweet], plan: SamplePlan) -> SampleDraw:
    """Draw tweet ids per class according to the plan; deterministic under seed.

    Unbiased mode follows plan.quotas exactly (documented spill when a month's
    per-class pool runs short).  Biased modes first force
    ceil(concentration * n) ids into the chosen months/deputies, then fill the
    remainder with the unbiased monthly allocation.  Unlabeled corpora yield a
    single worksheet pool of 2n ids under the None key.
    """
    rng = np.random.default_rng(plan.seed)
    pools = _pools_by_class(tweets)
    warnings: list[str] = []
    chosen_months: list[str] = []
    chosen_deputies: list[str] = []

    if plan.mode is SampleMode.BIASED_MONTHS:
        nonempty = sorted({t.month for t in tweets})
        k = min(plan.bias_months_k, len(nonempty))
        chosen_months = sorted(rng.choice(nonempty, size=k, replace=False).tolist())
    elif plan.mode is SampleMode.BIASED_DEPUTIES:
        deputies = sorted({t.deputy_id for t in tweets})
        k = min(plan.bias_deputies_k, len(deputies))
        chosen_deputies = sorted(rng.choice(deputies, size=k, replace=False).tolist())

    ids_by_class: dict[Label | None, list[str]] = {}
    for cls in sorted(pools, key=lambda c: (c is None, c.value if c else "")):
        pool = pools[cls]
        n = plan.per_class_size if cls is not None else 2 * plan.per_class_size
        scale = 1 if cls is not None else 2
        ids_by_month = _sorted_ids_by_month(pool)
        capacity = {m: len(v) for m, v in ids_by_month.items()}

        if plan.mode is SampleMode.UNBIASED:
            quotas = {m: q * scale for m, q in plan.quotas.items()}
            quotas, warns = rebalance_quotas(quotas, capacity)
            warnings.extend(f"class {cls.value if cls else 'pool'}: {w}" for w in warns)
            ids_by_class[cls] = _draw_monthly(rng, ids_by_month, quotas)

        elif plan.mode is SampleMode.BIASED_MONTHS:
            forced_n = math.ceil(plan.concentration * n)
            forced_hist = {m: capacity.get(m, 0) for m in chosen_months}
            if sum(forced_hist.values()) < forced_n:
                raise ToolError(
                    f"chosen months cannot hold {forced_n} forced draws for class "
                    f"{cls.value if cls else 'pool'}"
                )
            forced = proportional_quotas(forced_hist, forced_n)
            rest_hist = {m: c for m, c in capacity.items()}
            rest = proportional_quotas(rest_hist, n - forced_n) if n > forced_n else {}
            quotas = {m: forced.get(m, 0) + rest.get(m, 0) for m in set(forced) | set(rest)}
            quotas, warns = rebalance_quotas(quotas, capacity)
            warnings.extend(f"class {cls.value if cls else 'pool'}: {w}" for w in warns)
            ids_by_class[cls] = _draw_monthly(rng, ids_by_month, quotas)

        else:  # BIASED_DEPUTIES
            forced_n = math.ceil(plan.concentration * n)
            forced_pool = sorted(
                (t.posted_at, t.id) for t in pool if t.deputy_id in set(chosen_deputies)
            )
            if len(forced_pool) < forced_n:
                raise ToolError(
                    f"chosen deputies cannot hold {forced_n} forced draws for class "
                    f"{cls.value if cls else 'pool'}"
                )
            picks = rng.choice(len(forced_pool), size=forced_n, replace=False)
            forced_ids = [forced_pool[i][1] for i in sorted(picks)]
            taken = set(forced_ids)
            rest_pool = [t for t in pool if t.id not in taken]
            rest_months = _sorted_ids_by_month(rest_pool)
            rest_capacity = {m: len(v) for m, v in rest_months.items()}
            rest_n = n - forced_n
            rest_ids: list[str] = []
            if rest_n > 0:
                rest_quotas = proportional_quotas(
                    {m: len(v) for m, v in _sorted_ids_by_month(pool).items()}, rest_n
                )
                rest_quotas = {m: q for m, q in rest_quotas.items()}
                rest_quotas, warns = rebalance_quotas(rest_quotas, rest_capacity)
                warnings.extend(f"class {cls.value if cls else 'pool'}: {w}" for w in warns)
                rest_ids = _draw_monthly(rng, rest_months, rest_quotas)
            ids_by_class[cls] = forced_ids + rest_ids

    return SampleDraw(ids_by_class, chosen_months, chosen_deputies, warnings)
