import numpy as np
import pytest

from nlobs.systems import (
    DynamicalSystem,
    Nonlinearity,
    PolyTerm,
    Region,
    builtin,
)


@pytest.fixture
def example1():
    return builtin("example1")


@pytest.fixture
def example2():
    return builtin("example2")


@pytest.fixture
def example3():
    return builtin("example3")


def make_poly_system(rng, n=None, max_terms=4, max_exp=3, radius=None, coef_scale=1.0):
    """Random autonomous polynomial system for property tests."""
    n = int(rng.integers(1, 4)) if n is None else n
    n_terms = int(rng.integers(1, max_terms + 1))
    terms = []
    for _ in range(n_terms):
        exps = tuple(int(e) for e in rng.integers(0, max_exp, size=n))
        terms.append(
            PolyTerm(int(rng.integers(0, n)), float(coef_scale * rng.normal()), exps)
        )
    r = float(rng.uniform(0.5, 3.0)) if radius is None else radius
    return DynamicalSystem(
        A=np.zeros((n, n)),
        C=np.eye(n)[:1],
        phi=Nonlinearity("polynomial", terms=tuple(terms)),
        region=Region.ball(r, n),
    )


@pytest.fixture
def poly_system_factory():
    return make_poly_system
