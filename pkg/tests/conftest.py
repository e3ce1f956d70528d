import random

import pytest

from progmoney.crypto import KeyDirectory
from progmoney.registry import Registry


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def directory(rng):
    return KeyDirectory()


@pytest.fixture
def registry(directory, rng):
    reg = Registry(directory, "registry", rng=rng)
    return reg


@pytest.fixture
def bank(directory, registry, rng):
    keys = directory.create("central", rng)
    registry.authorize_issuer("central", 10**12)
    return keys
