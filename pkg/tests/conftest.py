import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # tests/oracles.py

from plausattn.corpus import load_corpus
from plausattn.tagging import FixtureTagger

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def tagger() -> FixtureTagger:
    return FixtureTagger(DATA_DIR / "tagger_fixtures.json")


@pytest.fixture(scope="session")
def esnli_train(tagger):
    return load_corpus("esnli", DATA_DIR, "train", tagger).examples


@pytest.fixture(scope="session")
def hatexplain_train(tagger):
    return load_corpus("hatexplain", DATA_DIR / "hatexplain", "train", tagger).examples


@pytest.fixture(scope="session")
def yelphat_all(tagger):
    return load_corpus("yelphat", DATA_DIR / "yelphat", "all", tagger).examples
