import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from core.generators import build_generator  # noqa: E402
from core.transform import BendletTransform, QuadratureSpec  # noqa: E402

ALPHA = 0.335


@pytest.fixture(scope="session")
def generator():
    """db8 x order-11 spline, the default pair"""
    return build_generator(8, 10, 11)


@pytest.fixture(scope="session")
def haar_generator():
    """Haar x hat function; small support, fails the smoothness condition"""
    return build_generator(1, 10, 2)


@pytest.fixture(scope="session")
def transform(generator):
    return BendletTransform(generator, ALPHA, QuadratureSpec(), threads=1)


@pytest.fixture(scope="session")
def adaptive_transform(generator):
    return BendletTransform(generator, ALPHA, QuadratureSpec(method="adaptive", tol=1e-8), threads=1)
