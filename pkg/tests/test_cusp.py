import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from cuspidal.branchcut import SpectralPoint, sqrt_plus
from cuspidal.bundle import Channel
from cuspidal.cusp import (CuspField, apply_resolvent, free_solution, inner_segment, l2_norm_segment,
                           l2_norm_tail, resolvent_kernel, sin_solution)
from cuspidal.errors import BranchError

REF = Channel(0, 0, 0.0, 1, False, 1)       # a = d = 1/2, theta = 1/4
U = 8.0


def bump(u, c=3.0, w=1.5):
    x = (u - c) / w
    out = np.zeros_like(u)
    m = np.abs(x) < 1
    out[m] = np.exp(-1 / (1 - x[m] ** 2))
    return out


def fd_residual(lam, n):
    u = np.linspace(0, U, n + 1)
    h = U / n
    f = bump(u)
    g = apply_resolvent(REF, lam, f, U)
    Lg = -(g[2:] - 2 * g[1:-1] + g[:-2]) / h ** 2 + (REF.theta - lam) * g[1:-1]
    return float(np.max(np.abs(Lg - f[1:-1])))


def test_free_solution_at_harmonic_point():
    d = REF.d
    e = free_solution(REF, SpectralPoint(2 * d, 0, d), +1)
    assert e.rate[0] == pytest.approx(-d, abs=1e-15)
    # un-gauged exponent a - d vanishes: the mode is constant
    assert REF.a + e.rate[0].real == pytest.approx(0, abs=1e-15)


def test_sin_solution_above_threshold():
    u = np.linspace(0, 5, 11)
    vals = sin_solution(REF, REF.theta + 1).values(u)[0]
    assert np.allclose(vals, np.sin(u), atol=1e-14)


def test_sin_solution_below_threshold_is_real_up_to_phase():
    u = np.linspace(0, 5, 11)
    vals = sin_solution(REF, REF.theta - 0.7).values(u)[0]
    phase = vals[1] / abs(vals[1])
    assert np.allclose((vals / phase).imag, 0, atol=1e-13)
    assert np.allclose(np.abs(vals), np.sinh(np.sqrt(0.7) * u), rtol=1e-12)


@given(st.floats(-2, 2), st.floats(0.01, 2), st.floats(0, 6))
def test_wronskian_of_free_pair(x, y, u):
    lam = complex(x, y)
    pt = SpectralPoint(complex(0.5 - 1j * sqrt_plus(lam - 0.25)), 0, 0.5)
    ep, em = free_solution(REF, pt, +1), free_solution(REF, pt, -1)
    W = em.values(u)[0] * ep.values(u, 1)[0] - em.values(u, 1)[0] * ep.values(u)[0]
    w = sqrt_plus(pt.lam - REF.theta)
    assert abs(W[0] - 2j * w) <= 1e-10 * max(1.0, abs(w)) * np.exp(2 * abs(w.imag) * u)


def test_resolvent_second_order():
    errs = [fd_residual(0.1 + 0.3j, n) for n in (200, 400, 800)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders > 1.8) & (orders < 2.2))


def test_resolvent_real_below_spectrum():
    u = np.linspace(0, U, 401)
    g = apply_resolvent(REF, -0.5, bump(u), U)
    assert np.max(np.abs(g.imag)) < 1e-14 * np.max(np.abs(g))


@given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(-1, 1), st.floats(0.01, 1))
def test_kernel_boundary_and_symmetry(u, r, x, y):
    lam = complex(x, y)
    assert resolvent_kernel(REF, lam, 0.0, r) == 0
    assert resolvent_kernel(REF, lam, u, r) == resolvent_kernel(REF, lam, r, u)


@given(st.floats(0.2, 5), st.floats(-1, 1), st.floats(0.01, 1))
def test_kernel_derivative_jump(r, x, y):
    lam = complex(x, y)
    eps = 1e-6
    K = lambda u: resolvent_kernel(REF, lam, u, r)
    right = (K(r + 2 * eps) - K(r + eps)) / eps
    left = (K(r - eps) - K(r - 2 * eps)) / eps
    assert abs((right - left) - (-1)) < 1e-4


def test_kernel_series_branch_matches_exact():
    lam = REF.theta + 1e-10j
    u, r = 0.3, 0.7
    w = complex(sqrt_plus(lam - REF.theta))
    exact = 1j / (2 * w) * (np.exp(1j * w * abs(u - r)) - np.exp(1j * w * (u + r)))
    assert abs(resolvent_kernel(REF, lam, u, r) - exact) < 1e-9
    assert abs(resolvent_kernel(REF, lam, u, r) - min(u, r)) < 1e-4


def test_kernel_refuses_spectrum():
    with pytest.raises(BranchError):
        resolvent_kernel(REF, REF.theta + 0.5, 1.0, 2.0)


# decay rates <= -0.5 keep the mass beyond start + 40 below 1e-17
terms = st.lists(st.tuples(st.integers(0, 1), st.floats(-2, 2), st.floats(-2, 2),
                           st.floats(-3, -0.5), st.floats(-3, 3)), min_size=1, max_size=4)


@given(terms, st.floats(0, 3))
def test_tail_norm_matches_quadrature(tt, start):
    F = CuspField.from_terms(2, [(c, complex(a, b), complex(x, y)) for c, a, b, x, y in tt])
    integrand = lambda u: float(np.sum(np.abs(F.values(u)) ** 2))
    num, _ = quad(integrand, start, start + 40, limit=400, epsabs=1e-14, epsrel=1e-12)
    assert abs(l2_norm_tail(F, start) - num) <= 1e-10 * max(1.0, num)


@given(terms, st.floats(0, 2), st.floats(0.01, 3))
def test_segment_norm_matches_quadrature(tt, a, length):
    # rates of either sign are admissible on a finite segment, including near-zero sums
    F = CuspField.from_terms(1, [(0, complex(p, q), complex(-x, y)) for _, p, q, x, y in tt])
    b = a + length
    integrand = lambda u: float(np.abs(F.values(u)[0, 0]) ** 2)
    num, _ = quad(integrand, a, b, limit=400, epsabs=1e-13, epsrel=1e-12)
    assert abs(l2_norm_segment(F, a, b) - num) <= 1e-9 * max(1.0, num)
    assert inner_segment(F, F, a, b).imag == pytest.approx(0, abs=1e-9 * max(1.0, num))


def test_segment_inner_product_near_cancelling_rates():
    F = CuspField.from_terms(1, [(0, 1.0, 0.3 + 1e-13j)])
    G = CuspField.from_terms(1, [(0, 1.0, -0.3 + 2e-13j)])
    assert abs(inner_segment(F, G, 0, 2.0) - 2.0) < 1e-11
