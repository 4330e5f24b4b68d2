import numpy as np
import pytest

from corpus import fixture_lexicon, lexicon_text, so_corpus, template_corpus
from frameid.lexicon import build_target_index


@pytest.fixture(scope="session")
def lexicon():
    return fixture_lexicon()


@pytest.fixture(scope="session")
def index(lexicon):
    return build_target_index(lexicon)


@pytest.fixture
def lexicon_file(tmp_path):
    path = tmp_path / "lexicon.txt"
    path.write_text(lexicon_text(), encoding="utf-8")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def so_instances(lexicon):
    return so_corpus(lexicon)


@pytest.fixture(scope="session")
def template_instances(lexicon):
    return template_corpus(lexicon, 50)
