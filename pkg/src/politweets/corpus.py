"""Corpus ingestion: JSONL parsing, text normalisation, dedup, deputy cohorts.

Normalisation pipeline (applied in this order, pinned for reproducibility):
NFC-normalise and lowercase the text, split on whitespace, drop tokens that
start with a URL scheme / '@' / '#', strip Unicode punctuation characters
from the survivors (accented letters are preserved), drop tokens shorter
than 2 characters, drop stopwords.  "RT" is an ordinary 2-character token.
Emoji are symbol characters, not punctuation, and are kept.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable

from .io_utils import ToolError, iter_jsonl_tolerant

URL_PREFIXES = ("http://", "https://")


class Cohort(Enum):
    REELECTED = "reelected"
    LOSER = "loser"
    NEWCOMER = "newcomer"


class Label(Enum):
    POLITICAL = "political"
    NON_POLITICAL = "non_political"


class LabelSource(Enum):
    MANUAL = "manual"
    PREDICTED = "predicted"


@dataclass(frozen=True)
class Deputy:
    id: str
    handle: str
    seated_before_election: bool
    seated_after_election: bool
    cohort: Cohort


@dataclass(frozen=True)
class Tweet:
    id: str
    deputy_id: str
    posted_at: datetime  # always timezone-aware UTC
    raw_text: str
    tokens: tuple[str, ...] = ()
    label: Label | None = None  # manual label when present in the source file

    @property
    def month(self) -> str:
        return f"{self.posted_at.year:04d}-{self.posted_at.month:02d}"


@dataclass(frozen=True)
class LabeledTweet:
    tweet: Tweet
    label: Label
    source: LabelSource


@dataclass(frozen=True)
class IngestError:
    line: int
    reason: str


@dataclass
class IngestResult:
    tweets: list[Tweet]
    deputies: dict[str, Deputy]
    tweet_errors: list[IngestError]
    deputy_errors: list[IngestError]


def assign_cohort(seated_before: bool, seated_after: bool) -> Cohort:
    """Map a deputy's pre-/post-election seat status to a cohort.

    (True, True) -> REELECTED, (True, False) -> LOSER, (False, True) -> NEWCOMER.
    A deputy seated neither before nor after is outside the study population.
    """
    if seated_before and seated_after:
        return Cohort.REELECTED
    if seated_before:
        return Cohort.LOSER
    if seated_after:
        return Cohort.NEWCOMER
    raise ValueError("deputy seated neither before nor after the election")


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Load the stopword set; defaults to the bundled pinned Portuguese list."""
    if path is None:
        text = resources.files("politweets.data").joinpath("stopwords_pt.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


def _strip_punctuation(token: str) -> str:
    return "".join(ch for ch in token if not unicodedata.category(ch).startswith("P"))


def normalize(raw_text: str, stopwords: frozenset[str] | set[str]) -> list[str]:
    """Tokenise one message; see the module docstring for the exact rules."""
    text = unicodedata.normalize("NFC", raw_text).lower()
    out: list[str] = []
    for token in text.split():
        if token.startswith(URL_PREFIXES) or token.startswith("@") or token.startswith("#"):
            continue
        token = _strip_punctuation(token)
        if len(token) < 2 or token in stopwords:
            continue
        out.append(token)
    return out


def dedupe(tweets: Iterable[Tweet]) -> list[Tweet]:
    """Collapse duplicates so at most one tweet per (deputy_id, raw_text) survives.

    Within a duplicate group the earliest posted_at wins (file order breaks
    timestamp ties); the survivor keeps the group's original position in the
    corpus.  A second pass enforces id uniqueness the same way, so the result
    carries one record per id.
    """
    first_pos: dict[tuple[str, str], int] = {}
    best: dict[tuple[str, str], tuple[datetime, int, Tweet]] = {}
    for pos, tweet in enumerate(tweets):
        key = (tweet.deputy_id, tweet.raw_text)
        if key not in first_pos:
            first_pos[key] = pos
            best[key] = (tweet.posted_at, pos, tweet)
        elif (tweet.posted_at, pos) < best[key][:2]:
            best[key] = (tweet.posted_at, pos, tweet)

    ordered = sorted(best.items(), key=lambda item: first_pos[item[0]])
    seen_ids: set[str] = set()
    out: list[Tweet] = []
    for _, (_, _, tweet) in ordered:
        if tweet.id in seen_ids:
            continue
        seen_ids.add(tweet.id)
        out.append(tweet)
    return out


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO 8601 timestamp with timezone and convert it to UTC."""
    dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        raise ValueError("timestamp has no timezone")
    return dt.astimezone(timezone.utc)


def _parse_deputy(obj: dict) -> Deputy:
    for key in ("id", "handle", "seated_before_election", "seated_after_election"):
        if key not in obj:
            raise ValueError(f"missing key '{key}'")
    before = obj["seated_before_election"]
    after = obj["seated_after_election"]
    if not isinstance(before, bool) or not isinstance(after, bool):
        raise ValueError("seat flags must be booleans")
    return Deputy(
        id=str(obj["id"]),
        handle=str(obj["handle"]),
        seated_before_election=before,
        seated_after_election=after,
        cohort=assign_cohort(before, after),
    )


def _parse_tweet(obj: dict, deputies: dict[str, Deputy]) -> Tweet:
    for key in ("id", "deputy_id", "posted_at", "text"):
        if key not in obj:
            raise ValueError(f"missing key '{key}'")
    deputy_id = str(obj["deputy_id"])
    if deputy_id not in deputies:
        raise ValueError(f"unknown deputy_id '{deputy_id}'")
    try:
        posted_at = parse_timestamp(str(obj["posted_at"]))
    except ValueError as exc:
        raise ValueError(f"bad posted_at: {exc}") from exc
    label = None
    if obj.get("label") is not None:
        try:
            label = Label(obj["label"])
        except ValueError:
            raise ValueError(f"bad label '{obj['label']}'") from None
    return Tweet(
        id=str(obj["id"]),
        deputy_id=deputy_id,
        posted_at=posted_at,
        raw_text=str(obj["text"]),
        label=label,
    )


def load_deputies(path: str | Path) -> tuple[dict[str, Deputy], list[IngestError]]:
    """Parse the deputies JSONL file, collecting per-line errors."""
    deputies: dict[str, Deputy] = {}
    errors: list[IngestError] = []
    for lineno, obj, err in iter_jsonl_tolerant(path):
        if err is not None:
            errors.append(IngestError(lineno, err))
            continue
        try:
            deputy = _parse_deputy(obj)
        except ValueError as exc:
            errors.append(IngestError(lineno, str(exc)))
            continue
        if deputy.id in deputies:
            errors.append(IngestError(lineno, f"duplicate deputy id '{deputy.id}'"))
            continue
        deputies[deputy.id] = deputy
    return deputies, errors


def ingest(tweets_path: str | Path, deputies_path: str | Path) -> IngestResult:
    """Stream both JSONL files into a corpus.

    Malformed lines and tweets referencing unknown deputies are recorded with
    their line numbers; ingestion continues past them.  Tokens are left empty;
    run normalize/dedupe (or prepare_corpus) afterwards.
    """
    deputies, deputy_errors = load_deputies(deputies_path)

    tweets: list[Tweet] = []
    tweet_errors: list[IngestError] = []
    for lineno, obj, err in iter_jsonl_tolerant(tweets_path):
        if err is not None:
            tweet_errors.append(IngestError(lineno, err))
            continue
        try:
            tweets.append(_parse_tweet(obj, deputies))
        except ValueError as exc:
            tweet_errors.append(IngestError(lineno, str(exc)))

    return IngestResult(tweets, deputies, tweet_errors, deputy_errors)


def prepare_corpus(
    tweets_path: str | Path,
    deputies_path: str | Path,
    stopwords: frozenset[str] | None = None,
) -> tuple[list[Tweet], dict[str, Deputy], IngestResult]:
    """Ingest, normalise and dedupe in one step; returns the ready corpus."""
    if stopwords is None:
        stopwords = load_stopwords()
    result = ingest(tweets_path, deputies_path)
    normalized = [
        Tweet(
            id=t.id,
            deputy_id=t.deputy_id,
            posted_at=t.posted_at,
            raw_text=t.raw_text,
            tokens=tuple(normalize(t.raw_text, stopwords)),
            label=t.label,
        )
        for t in result.tweets
    ]
    return dedupe(normalized), result.deputies, result


def tweet_to_record(tweet: Tweet, deputies: dict[str, Deputy] | None = None) -> dict:
    """Serialise a tweet to the corpus JSONL schema."""
    record = {
        "id": tweet.id,
        "deputy_id": tweet.deputy_id,
        "posted_at": tweet.posted_at.isoformat(),
        "text": tweet.raw_text,
        "tokens": list(tweet.tokens),
        "label": tweet.label.value if tweet.label else None,
    }
    if deputies is not None and tweet.deputy_id in deputies:
        record["cohort"] = deputies[tweet.deputy_id].cohort.value
    return record


def tweet_from_record(obj: dict) -> Tweet:
    """Read back a tweet from the corpus JSONL schema (tokens already present)."""
    label = Label(obj["label"]) if obj.get("label") else None
    return Tweet(
        id=str(obj["id"]),
        deputy_id=str(obj["deputy_id"]),
        posted_at=parse_timestamp(str(obj["posted_at"])),
        raw_text=str(obj.get("text", "")),
        tokens=tuple(obj.get("tokens", ())),
        label=label,
    )


def load_corpus_file(path: str | Path) -> list[Tweet]:
    """Load a normalised corpus JSONL file written by the ingest stage."""
    tweets = []
    for lineno, obj, err in iter_jsonl_tolerant(path):
        if err is not None:
            raise ToolError(f"{path}:{lineno}: {err}")
        try:
            tweets.append(tweet_from_record(obj))
        except (KeyError, ValueError) as exc:
            raise ToolError(f"{path}:{lineno}: bad corpus record ({exc})")
    return tweets
