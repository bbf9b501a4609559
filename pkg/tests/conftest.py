import os

import numpy as np
import pytest

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


@pytest.fixture(scope="session")
def compas_path():
    return os.path.join(DATA_DIR, "compas_fixture.csv")


@pytest.fixture(scope="session")
def adult_path():
    return os.path.join(DATA_DIR, "adult_fixture.csv")


@pytest.fixture(scope="session")
def cc_path():
    return os.path.join(DATA_DIR, "communities_fixture.csv")


def random_joint(rng, card_a=None, card_b=None, max_card=8):
    """Strictly positive random joint pmf table."""
    card_a = card_a or rng.integers(2, max_card + 1)
    card_b = card_b or rng.integers(2, max_card + 1)
    return rng.dirichlet(np.ones(card_a * card_b)).reshape(card_a, card_b) + 0.0
