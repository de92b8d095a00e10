import numpy as np
import pytest
from hypothesis import given, strategies as st

from cuspidal.errors import InvariantViolation
from cuspidal.residues import (contour_residue, pole_scan, psd_split, rectangle_sweep, residue_invariants,
                               residue_pairing_check)

import oracles
from conftest import scenario


@pytest.fixture(scope="module")
def well_scan(tuned_well):
    return pole_scan(tuned_well)


@pytest.fixture(scope="module")
def well_residue(tuned_well, well_scan):
    return contour_residue(tuned_well, well_scan.poles[0])


def test_dirichlet_vertex_has_no_poles():
    res = pole_scan(scenario("dirichlet-cone"))
    assert res.poles == [] and res.unresolved == []


def test_neumann_vertex_has_no_poles():
    res = pole_scan(scenario("neumann-cone"))
    assert res.poles == [] and res.unresolved == []


def test_middle_degree_scan_is_empty(random_middle):
    assert pole_scan(random_middle).poles == []


def test_tuned_well_pole_matches_oracle(well_scan):
    assert len(well_scan.poles) == 1
    assert abs(well_scan.poles[0] - oracles.frozen("well_pole")) <= 1e-8


def test_tuned_well_residue_matches_oracle_limit(well_residue):
    assert abs(well_residue.C[0, 0] - oracles.frozen("well_residue")) <= 1e-7


def test_residue_spectrally_converged(tuned_well, well_scan):
    a = contour_residue(tuned_well, well_scan.poles[0], M=32).C
    b = contour_residue(tuned_well, well_scan.poles[0], M=64).C
    assert np.max(np.abs(a - b)) < 1e-10


def test_residue_pairing_unit_vector(tuned_well, well_residue):
    assert residue_pairing_check(tuned_well, well_residue, [1.0], [1.0]) <= 1e-6


def test_residue_invariants(well_residue):
    inv = residue_invariants(well_residue)
    assert inv["hermitian_defect"] <= 1e-9 * inv["norm"]
    assert inv["min_eig"] >= -1e-10
    assert inv["order_certificate"] <= 1e-7
    assert inv["leak"] <= 1e-8


def test_two_channel_rank_matches_root_multiplicity():
    scn = scenario("tuned-well-2ch")
    res = pole_scan(scn)
    assert len(res.poles) == 1
    rd = contour_residue(scn, res.poles[0])
    ker, im = psd_split(rd.C)
    assert (ker.shape[1], im.shape[1]) == (0, 2)
    assert np.allclose(rd.C, oracles.frozen("well_residue") * np.eye(2), atol=1e-7)


def test_pole_set_matches_residue_support(tuned_well, well_scan):
    # away from the pole the contour residue vanishes; at it, it does not
    for x in np.linspace(tuned_well.d + 0.05, 2 * tuned_well.d - 0.02, 5):
        if abs(x - well_scan.poles[0]) < 0.05:
            continue
        rd = contour_residue(tuned_well, x, rho=0.02)
        assert np.max(np.abs(rd.C_full)) < 1e-10
    assert np.linalg.norm(contour_residue(tuned_well, well_scan.poles[0]).C) > 1e-3


def test_no_poles_off_the_interval(tuned_well):
    sigma, _ = rectangle_sweep(tuned_well, nx=15, ny=5)
    assert sigma >= tuned_well.numerics.sigma_floor


def test_middle_block_regular_at_harmonic_point(random_middle):
    rd = contour_residue(random_middle, 0.0, check=False)
    assert np.max(np.abs(rd.C_full)) <= 1e-8


def test_pole_at_harmonic_point():
    scn = scenario("tuned-harmonic")
    res = pole_scan(scn)
    assert len(res.poles) == 1 and abs(res.poles[0] - 2 * scn.d) < 1e-8
    rd = contour_residue(scn, 2 * scn.d)
    assert rd.C[0, 0].real > 0.1 and rd.order_certificate <= 1e-7


def test_middle_branch_point_uses_double_loop(random4):
    # s = 2d sits on the middle threshold lambda = 0
    rd = contour_residue(random4, 2 * random4.d)
    assert rd.loops == 2
    assert np.max(np.abs(rd.C)) < 1e-8


def random_psd(seed, n, rank):
    g = np.random.default_rng(seed)
    A = g.normal(size=(n, rank)) + 1j * g.normal(size=(n, rank))
    return A @ A.conj().T


@given(st.integers(0, 10_000), st.integers(1, 6), st.data())
def test_psd_split_dimensions(seed, n, data):
    rank = data.draw(st.integers(0, n))
    C = random_psd(seed, n, rank)
    ker, im = psd_split(C)
    assert ker.shape[1] + im.shape[1] == n
    assert im.shape[1] == rank
    B = np.hstack([ker, im])
    assert np.allclose(B.conj().T @ B, np.eye(n), atol=1e-10)
    if ker.shape[1] and rank:
        assert np.max(np.abs(C @ ker)) <= 1e-8 * np.linalg.norm(C, 2)


def test_psd_split_zero_matrix():
    ker, im = psd_split(1e-14 * np.eye(3))
    assert ker.shape[1] == 3 and im.shape[1] == 0


def test_psd_split_rejects_non_hermitian():
    with pytest.raises(InvariantViolation):
        psd_split(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_psd_split_rejects_negative():
    with pytest.raises(InvariantViolation):
        psd_split(np.diag([1.0, -0.5]))
