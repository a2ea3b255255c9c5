import math
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ionmux.errors import ParameterError
from ionmux.timing import (
    EnhancementCurve,
    LinkParams,
    enhancement,
    enhancement_inhomogeneous,
    n_half_duty,
    t_eff,
)

links = st.builds(
    LinkParams,
    L=st.floats(0.0, 1e5),
    T_ovh=st.floats(0.0, 1e-2),
    dt=st.floats(1e-9, 1e-4),
    N=st.integers(1, 500),
    c_fiber=st.just(2.0e8),
)


def test_basic_values():
    link = LinkParams(L=12000.0, T_ovh=50e-6, dt=2e-6, N=1)
    assert link.round_trip == pytest.approx(120e-6)
    assert t_eff(link) == pytest.approx(172e-6)
    assert enhancement(link) == pytest.approx(1.0)


@given(links)
@settings(max_examples=300)
def test_enhancement_bounds(link):
    m = enhancement(link)
    assert 1.0 - 1e-12 <= m <= link.N + 1e-9
    single = replace(link, N=1)
    assert enhancement(single) == pytest.approx(1.0, abs=1e-12)


@given(links)
@settings(max_examples=300)
def test_t_eff_decreasing_in_n(link):
    bigger = replace(link, N=link.N + 1)
    assert t_eff(bigger) <= t_eff(link) + 1e-18


@given(st.floats(1e-3, 1e5), st.floats(0.0, 1e-2), st.floats(1e-9, 1e-4))
@settings(max_examples=300)
def test_half_duty_closed_form(L, T_ovh, dt):
    link = LinkParams(L=L, T_ovh=T_ovh, dt=dt, N=1)
    n0 = n_half_duty(link)
    n0_int = max(1, round(n0))
    if abs(n0 - n0_int) < 1e-9 * max(1.0, n0):
        at_n0 = replace(link, N=n0_int)
        assert enhancement(at_n0) == pytest.approx((n0_int + 1) / 2.0,
                                                   rel=1e-9)


def test_half_duty_exact_integer():
    # round trip + overhead = 100 us, dt = 1 us -> N_0 = 100
    link = LinkParams(L=5000.0, T_ovh=50e-6, dt=1e-6, N=100)
    assert n_half_duty(link) == pytest.approx(100.0)
    assert enhancement(link) == pytest.approx(50.5, rel=1e-12)


def test_inhomogeneous_reduces_to_homogeneous():
    link = LinkParams(L=1000.0, T_ovh=10e-6, dt=300e-9, N=1)
    p0 = 0.05
    for n in (1, 4, 16):
        m = enhancement(replace(link, N=n))
        m_prime = enhancement_inhomogeneous(link, [p0] * n, p0)
        assert m_prime == pytest.approx(m, rel=1e-12)


def test_inhomogeneous_scales_with_mean():
    link = LinkParams(L=1000.0, T_ovh=10e-6, dt=300e-9, N=1)
    p = [0.06, 0.03, 0.02, 0.01]
    m = enhancement(replace(link, N=4))
    got = enhancement_inhomogeneous(link, p, 0.06)
    assert got == pytest.approx(m * (sum(p) / 4) / 0.06, rel=1e-12)


def test_inhomogeneous_validation():
    link = LinkParams(L=1.0, T_ovh=0.0, dt=1e-9, N=1)
    with pytest.raises(ParameterError):
        enhancement_inhomogeneous(link, [], 0.1)
    with pytest.raises(ParameterError):
        enhancement_inhomogeneous(link, [0.1], 0.0)


def test_zero_dt_half_duty_infinite():
    link = LinkParams(L=1.0, T_ovh=1e-6, dt=0.0, N=1)
    assert math.isinf(n_half_duty(link))


def test_curve_sampling():
    link = LinkParams(L=12000.0, T_ovh=50e-6, dt=2e-6, N=1)
    curve = EnhancementCurve.sample(link, [1, 10, 85, 200])
    assert curve.points[0] == (1, pytest.approx(1.0))
    assert curve.n_half == pytest.approx(85.0)
    assert curve.m_saturated == pytest.approx(43.0)
    ms = [m for _, m in curve.points]
    assert ms == sorted(ms)
    # enhancement at N_0 is (N_0+1)/2
    assert dict(curve.points)[85] == pytest.approx(43.0, rel=1e-12)


def test_parameter_guards():
    with pytest.raises(ParameterError):
        LinkParams(L=-1.0, T_ovh=0.0, dt=1e-9)
    with pytest.raises(ParameterError):
        LinkParams(L=1.0, T_ovh=-1e-9, dt=1e-9)
    with pytest.raises(ParameterError):
        LinkParams(L=1.0, T_ovh=0.0, dt=1e-9, N=0)
