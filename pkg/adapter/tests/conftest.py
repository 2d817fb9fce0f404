"""Session-wide toy world: one deterministic training run shared by all tests."""

import pytest

from nf_adapter.toy import make_toy_world


@pytest.fixture(scope="session")
def toy_world():
    return make_toy_world(seed=0)
