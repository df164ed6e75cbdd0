import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vec3 = arrays(np.float64, 3, elements=st.floats(-10, 10, allow_nan=False, allow_infinity=False))


@st.composite
def unit_quats(draw):
    v = draw(arrays(np.float64, 4, elements=st.floats(-1, 1, allow_nan=False, allow_infinity=False)))
    n = np.linalg.norm(v)
    if n < 1e-3:
        v, n = np.array([1.0, 0, 0, 0]), 1.0
    return v / n


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
