import math

import numpy as np
import pytest

from tiltx.chain import TiltXConfig
from tiltx.geometry import Geometry


@pytest.fixture
def g():
    return Geometry()


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


def random_config(rng, g, bend_range=(0.0, math.pi)):
    return TiltXConfig.make(
        rng.uniform(*bend_range) / g.L,
        rng.uniform(-math.pi, math.pi),
        rng.uniform(0.0, math.pi / 2),
        rng.uniform(0.0, g.beta_max),
        g,
    )
