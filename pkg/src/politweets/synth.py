"""Synthetic corpus generator.

The real labelled dataset is not distributable, so experiments and tests run
on generated corpora with the same shape: two class vocabularies with a
tunable shared fraction, a per-month volume profile, and per-deputy
assignment.

Three mechanisms make time- or author-skewed training pools genuinely
overfit, mirroring the bias experiment:

* within a class, stable token usage drifts over time: each month leans on
  its own slice of the class vocabulary, so a sample concentrated on a few
  months under-covers the rest;
* a *month-polar* token family carries variable polarity: each such token
  counts as political in roughly half the months and non-political in the
  others.  Averaged over the corpus these tokens are class-neutral, so an
  unbiased sample teaches a model to ignore them, while a few-months sample
  reads them as consistent class evidence and pays for it on the full test
  distribution;
* every deputy, and likewise every month, owns small *personal* political
  and non-political vocabularies.  A few-deputies (or few-months) sample
  sees those personal tokens as strong, perfectly consistent features and
  leans on them; they never occur outside their owner's tweets, so the
  learned shortcuts are worthless on most of the test set.

Generated tokens are normalisation-stable (lowercase ASCII, length >= 3, not
stopwords), so a round trip through ingest + normalize keeps them intact.
Decoration tokens (URLs, mentions, hashtags) are injected at a configurable
rate and disappear during normalisation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .corpus import Cohort, Label
from .io_utils import ToolError, write_jsonl
from .sampling import month_span

COHORT_SEAT_FLAGS = {
    Cohort.REELECTED: (True, True),
    Cohort.LOSER: (True, False),
    Cohort.NEWCOMER: (False, True),
}


@dataclass
class SynthConfig:
    n_tweets: int = 8000
    n_deputies: int = 40
    start_month: str = "2014-01"
    n_months: int = 12
    vocab_size: int = 320  # stable vocabulary per class, including the shared part
    overlap: float = 0.3  # fraction of each class vocabulary shared with the other
    var_month_vocab_size: int = 200  # month-polar token family
    personal_size: int = 8  # personal tokens per deputy per class
    month_personal_size: int = 8  # personal tokens per month per class
    tokens_min: int = 5
    tokens_max: int = 8
    # token-source mixture (remaining mass draws from the whole class vocabulary)
    month_mix: float = 0.15  # month's slice of the stable class vocabulary
    personal_mix: float = 0.20  # deputy's own tokens for the tweet's class
    month_personal_mix: float = 0.12  # month's own tokens for the tweet's class
    shared_mix: float = 0.08  # class-neutral shared vocabulary
    var_month_mix: float = 0.25  # month-polar tokens
    month_slice_frac: float = 0.20
    political_share: dict[str, float] = field(
        default_factory=lambda: {"reelected": 0.50, "newcomer": 0.43, "loser": 0.43}
    )
    cohort_weights: tuple[float, float, float] = (0.4, 0.3, 0.3)  # reelected, newcomer, loser
    decoration_rate: float = 0.15  # P(tweet carries a URL/mention/hashtag decoration)
    volume_profile: list[float] | None = None  # per-month relative volumes
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.overlap < 1.0:
            raise ToolError("overlap must lie in [0, 1)")
        mixture = (
            self.month_mix + self.personal_mix + self.month_personal_mix
            + self.shared_mix + self.var_month_mix
        )
        if mixture > 1.0:
            raise ToolError("mixture probabilities exceed 1")
        if self.n_months < 1 or self.n_tweets < 1 or self.n_deputies < 1:
            raise ToolError("corpus dimensions must be positive")
        if self.volume_profile is not None and len(self.volume_profile) != self.n_months:
            raise ToolError("volume profile length must equal n_months")


@dataclass
class SynthCorpus:
    tweets: list[dict]
    deputies: list[dict]
    months: list[str]
    political_vocab: list[str]
    non_political_vocab: list[str]
    shared_vocab: list[str]
    month_polar_vocab: list[str]
    personal_vocab: dict[str, dict[str, list[str]]]  # deputy id -> label value -> tokens
    month_personal_vocab: dict[str, dict[str, list[str]]]  # month -> label value -> tokens


def _slice_words(words: list[str], start_frac: float, width: int) -> list[str]:
    """Contiguous wrap-around slice of the word list."""
    n = len(words)
    start = int(start_frac * n) % n
    return [(words[(start + i) % n]) for i in range(min(width, n))]


def _default_profile(months: list[str]) -> list[float]:
    # gentle seasonal ramp with a bump in the middle third (election season)
    n = len(months)
    profile = []
    for i in range(n):
        base = 1.0 + 0.4 * np.sin(2 * np.pi * i / max(n, 1))
        bump = 0.8 if n // 3 <= i < 2 * n // 3 else 0.0
        profile.append(base + bump)
    return profile


def generate(config: SynthConfig) -> SynthCorpus:
    """Build a labelled synthetic corpus; deterministic under config.seed."""
    rng = np.random.default_rng(config.seed)
    months = month_span(config.start_month, _add_months(config.start_month, config.n_months - 1))

    n_shared = round(config.vocab_size * config.overlap)
    n_only = config.vocab_size - n_shared
    shared = [f"com{i:03d}" for i in range(n_shared)]
    pol_only = [f"pol{i:03d}" for i in range(n_only)]
    non_only = [f"cot{i:03d}" for i in range(n_only)]
    varm = [f"vam{i:03d}" for i in range(config.var_month_vocab_size)]
    class_words = {Label.POLITICAL: pol_only, Label.NON_POLITICAL: non_only}

    # True rows count as political for that month
    varm_polarity = rng.random((config.var_month_vocab_size, config.n_months)) < 0.5

    month_width = max(2, round(n_only * config.month_slice_frac))

    cohorts = list(Cohort)
    cohort_draw = rng.choice(3, size=config.n_deputies, p=np.array(config.cohort_weights))
    activity = rng.lognormal(mean=0.0, sigma=0.6, size=config.n_deputies)
    activity /= activity.sum()
    deputies = []
    personal: dict[str, dict[str, list[str]]] = {}
    for d in range(config.n_deputies):
        cohort = cohorts[int(cohort_draw[d])]
        before, after = COHORT_SEAT_FLAGS[cohort]
        dep_id = f"dep{d:03d}"
        deputies.append(
            {
                "id": dep_id,
                "handle": f"@{dep_id}",
                "seated_before_election": before,
                "seated_after_election": after,
            }
        )
        personal[dep_id] = {
            Label.POLITICAL.value: [
                f"mip{d:03d}x{j}" for j in range(config.personal_size)
            ],
            Label.NON_POLITICAL.value: [
                f"min{d:03d}x{j}" for j in range(config.personal_size)
            ],
        }

    month_personal: dict[str, dict[str, list[str]]] = {}
    for m, month in enumerate(months):
        month_personal[month] = {
            Label.POLITICAL.value: [
                f"mop{m:03d}x{j}" for j in range(config.month_personal_size)
            ],
            Label.NON_POLITICAL.value: [
                f"mon{m:03d}x{j}" for j in range(config.month_personal_size)
            ],
        }

    profile = np.array(config.volume_profile or _default_profile(months), dtype=float)
    profile /= profile.sum()
    month_of_tweet = rng.choice(len(months), size=config.n_tweets, p=profile)
    deputy_of_tweet = rng.choice(config.n_deputies, size=config.n_tweets, p=activity)

    share_by_cohort = {Cohort(name): p for name, p in config.political_share.items()}

    cut_month = config.month_mix
    cut_personal = cut_month + config.personal_mix
    cut_month_personal = cut_personal + config.month_personal_mix
    cut_shared = cut_month_personal + config.shared_mix
    cut_varm = cut_shared + config.var_month_mix

    tweets = []
    for i in range(config.n_tweets):
        m = int(month_of_tweet[i])
        d = int(deputy_of_tweet[i])
        dep_id = f"dep{d:03d}"
        cohort = cohorts[int(cohort_draw[d])]
        is_political = bool(rng.random() < share_by_cohort[cohort])
        label = Label.POLITICAL if is_political else Label.NON_POLITICAL
        words = class_words[label]
        month_slice = _slice_words(words, m / len(months), month_width)
        personal_pool = personal[dep_id][label.value]
        month_personal_pool = month_personal[months[m]][label.value]
        varm_pool = [varm[j] for j in range(len(varm)) if varm_polarity[j, m] == is_political]

        n_tokens = int(rng.integers(config.tokens_min, config.tokens_max + 1))
        tokens = []
        draws = rng.random(n_tokens)
        for r in draws:
            if r < cut_month:
                pool = month_slice
            elif r < cut_personal:
                pool = personal_pool if personal_pool else words
            elif r < cut_month_personal:
                pool = month_personal_pool if month_personal_pool else words
            elif r < cut_shared:
                pool = shared if shared else words
            elif r < cut_varm:
                pool = varm_pool if varm_pool else words
            else:
                pool = words
            tokens.append(pool[int(rng.integers(len(pool)))])

        text = " ".join(tokens)
        if rng.random() < config.decoration_rate:
            decoration = [
                f"http://t.co/x{i % 97:02d}",
                f"@dep{int(rng.integers(config.n_deputies)):03d}",
                f"#tag{int(rng.integers(50)):02d}",
            ][int(rng.integers(3))]
            text = f"{text} {decoration}"

        posted = _timestamp_in_month(months[m], rng)
        tweets.append(
            {
                "id": f"t{i:06d}",
                "deputy_id": dep_id,
                "posted_at": posted.isoformat(),
                "text": text,
                "label": label.value,
            }
        )

    return SynthCorpus(
        tweets=tweets,
        deputies=deputies,
        months=months,
        political_vocab=pol_only,
        non_political_vocab=non_only,
        shared_vocab=shared,
        month_polar_vocab=varm,
        personal_vocab=personal,
        month_personal_vocab=month_personal,
    )


def _add_months(month: str, delta: int) -> str:
    y, m = int(month[:4]), int(month[5:7])
    total = (y * 12 + (m - 1)) + delta
    return f"{total // 12:04d}-{total % 12 + 1:02d}"


def _days_in_month(year: int, month: int) -> int:
    nxt = datetime(year + (month == 12), month % 12 + 1, 1, tzinfo=timezone.utc)
    return (nxt - datetime(year, month, 1, tzinfo=timezone.utc)).days


def _timestamp_in_month(month: str, rng: np.random.Generator) -> datetime:
    year, mon = int(month[:4]), int(month[5:7])
    day = int(rng.integers(1, _days_in_month(year, mon) + 1))
    second = int(rng.integers(0, 24 * 3600))
    return datetime(year, mon, day, tzinfo=timezone.utc) + timedelta(seconds=second)


def write_corpus(corpus: SynthCorpus, tweets_path: str | Path, deputies_path: str | Path) -> None:
    write_jsonl(tweets_path, corpus.tweets)
    write_jsonl(deputies_path, corpus.deputies)
