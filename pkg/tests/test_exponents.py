import math

import pytest
from hypothesis import given, strategies as st

from fermi_nls.exponents import BOUNDARY_GAP, ExponentConfig, alpha1_of, eta_of


@pytest.mark.parametrize("d,alpha,alpha1,regime", [
    (3, 0.75, 0.5, "middle"), (2, 1.0, 1.0, "high"), (1, 0.0, 0.0, "one_dim"),
    (3, 0.6, 0.2, "middle"), (3, 1.5, 1.5, "high"), (2, 0.5, 0.5 - BOUNDARY_GAP, "boundary"),
    (3, 1.0, 1.0 - BOUNDARY_GAP, "boundary")])
def test_alpha1_table(d, alpha, alpha1, regime):
    a1, r = alpha1_of(d, alpha)
    assert a1 == pytest.approx(alpha1, abs=1e-12)
    assert r == regime


def test_eta():
    assert eta_of(2, 1.0) == 0.0
    assert eta_of(3, 1.0) > 0
    assert eta_of(3, 1.5) == 0.0


@pytest.mark.parametrize("d,alpha", [(1, -0.1), (2, 0.25), (2, 0.1), (3, 0.5), (4, 1.0)])
def test_invalid_alpha(d, alpha):
    with pytest.raises(ValueError):
        alpha1_of(d, alpha)
    with pytest.raises(ValueError):
        ExponentConfig.resolve(d, alpha)


def test_config_rejects_inconsistent_alpha1():
    with pytest.raises(ValueError):
        ExponentConfig(3, 0.75, 0.9, 0.0)
    ExponentConfig(3, 0.75, 0.4, 0.0)


@given(st.integers(2, 3), st.floats(0.0, 3.0))
def test_regularity_gain(d, x):
    alpha = (d - 1) / 4 + 1e-6 + x
    if abs(alpha - (d - 1) / 2) < 1e-12:
        return
    a1, regime = alpha1_of(d, alpha)
    if regime == "middle":
        assert a1 + 0.5 > alpha
        assert a1 > -1e-6
    assert math.isfinite(a1)
