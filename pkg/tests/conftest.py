import json
from datetime import datetime, timezone
from pathlib import Path

import pytest

from politweets.corpus import Label, Tweet, load_stopwords

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def stopwords():
    return load_stopwords()


@pytest.fixture(scope="session")
def normalization_cases():
    cases = []
    with open(DATA_DIR / "normalization_cases.jsonl", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                cases.append(json.loads(line))
    return cases


def make_tweet(
    tweet_id: str,
    deputy_id: str = "dep001",
    posted_at: str = "2014-03-05T12:00:00+00:00",
    text: str = "texto",
    tokens: tuple[str, ...] = (),
    label: Label | None = None,
) -> Tweet:
    return Tweet(
        id=tweet_id,
        deputy_id=deputy_id,
        posted_at=datetime.fromisoformat(posted_at).astimezone(timezone.utc),
        raw_text=text,
        tokens=tokens,
        label=label,
    )
