import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pcrqa import ingest
from pcrqa.dataset import build_requests, filter_rare_tags
from pcrqa.pipeline import open_knowledge
from pcrqa.config import PipelineConfig

DATA_DIR = Path(__file__).parent / "data"

FIXTURE_RARE_TAGS = {"beginner", "homework", "winforms"}
FIXTURE_DROPPED_IDS = {27, 28}
FIXTURE_QUESTION_ROWS = 50
FIXTURE_THETA = 3


@pytest.fixture(scope="session")
def fixture_dump() -> Path:
    return DATA_DIR / "posts_fixture.xml"


@pytest.fixture(scope="session")
def fixture_records(fixture_dump):
    """All retained posts from the fixture dump, as ingest records."""
    records, errors = [], []
    with open(fixture_dump, "rb") as fh:
        for item in ingest.stream_posts(fh):
            if isinstance(item, ingest.RowError):
                errors.append(item)
                continue
            try:
                records.append(ingest.post_to_record(item))
            except ingest.TagFormatError as exc:
                errors.append(ingest.RowError(str(exc), item.id))
    return records, errors


@pytest.fixture(scope="session")
def fixture_corpus(fixture_records):
    records, _ = fixture_records
    requests = build_requests([r for r in records if r["tags"]])
    return filter_rare_tags(requests, FIXTURE_THETA)


@pytest.fixture(scope="session")
def knowledge_base():
    return open_knowledge(PipelineConfig())
