import numpy as np
import pytest
from hypothesis import settings

from unicusum.alphabet_dist import Categorical

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def fair():
    return Categorical([0.5, 0.5])


@pytest.fixture
def skewed():
    return Categorical([0.9, 0.1])
