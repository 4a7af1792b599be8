from pathlib import Path

import pytest

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def mini_corpus_path() -> Path:
    return DATA_DIR / "mini_corpus.jsonl"


@pytest.fixture
def mini_tally_path() -> Path:
    return DATA_DIR / "mini_tally.json"
