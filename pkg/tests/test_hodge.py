import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cuspidal.bundle import kunneth_table
from cuspidal.errors import InvariantViolation, ScenarioError
from cuspidal.hodge import (ClassifierInput, classification_report, classifier_from_dict,
                            classifier_from_pipeline, exactness_check_lower, h_inf_dimension, middle_split,
                            middle_value_field_norm, restriction_image, signature_check, xi_classify, xi_table)
from cuspidal.scatter import dualize, t_derivative

import oracles
from conftest import scenario, scenario_file

FAMILIES = [("dirichlet-cone", [1], [1, 1]), ("neumann-cone", [1], [1, 1]),
            ("dirichlet-torus", [1, 1], [1, 2, 1]), ("neumann-torus", [1, 1], [1, 2, 1])]


@pytest.fixture(scope="module")
def pipelines():
    out = {}
    for name, _, _ in FAMILIES + [("tuned-harmonic", None, None), ("random-middle", None, None)]:
        sf = scenario_file(name)
        out[name] = classifier_from_pipeline(sf.bundle, sf.model_for, sf.numerics)
    return out


def test_middle_split_constant_vertices():
    plus, minus = middle_split(-np.eye(3))
    assert plus.shape[1] == 0 and minus.shape[1] == 3
    plus, minus = middle_split(np.eye(2))
    assert plus.shape[1] == 2 and minus.shape[1] == 0


def test_middle_split_rejects_non_involution():
    with pytest.raises(InvariantViolation):
        middle_split(np.diag([1.0, 0.5]))


@pytest.mark.parametrize("name,bB,bF", FAMILIES)
def test_vertex_family_tables(pipelines, name, bB, bF):
    inp = pipelines[name]
    vertex = name.split("-")[0]
    dims = [h_inf_dimension(inp, p) for p in range(inp.bundle.n + 2)]
    assert dims == oracles.vertex_family_dims(bB, bF, vertex)


def test_h_inf_circle_fiber_over_point(pipelines):
    assert h_inf_dimension(pipelines["dirichlet-cone"], 1) == 1
    assert h_inf_dimension(pipelines["neumann-cone"], 1) == 1


def test_upper_blocks_are_values_at_harmonic_point(pipelines):
    inp = pipelines["dirichlet-torus"]
    for p in range(inp.bundle.n + 2):
        for blk in restriction_image(inp, p):
            if 2 * blk.k > inp.bundle.f and blk.dim_block:
                assert blk.dim == blk.dim_block
                assert set(xi_table(inp, p)[blk.k]) == {"valueAt2d"}


def test_middle_minus_space_has_vanishing_field(pipelines):
    inp = pipelines["random-middle"]
    for p, T0 in inp.T0.items():
        _, minus = middle_split(T0)
        scn = inp.scenarios[(p, inp.bundle.f // 2)]
        for j in range(minus.shape[1]):
            tag, _ = xi_classify(inp, p, inp.bundle.f // 2, minus[:, j])
            assert tag == "zero"
            assert middle_value_field_norm(scn, minus[:, j]) <= 1e-8


@pytest.mark.parametrize("name", ["dirichlet-cone", "closed-form"])
def test_exactness_dirichlet_and_closed_form(name):
    assert exactness_check_lower(scenario(name), [1.0]) <= 1e-12


def test_exactness_tuned_well(tuned_well):
    assert exactness_check_lower(tuned_well, [1.0]) <= 1e-7


def test_signature_tuned_harmonic(pipelines):
    sig = signature_check(pipelines["tuned-harmonic"])
    assert sig["dimWplus"] == sig["dimWminus"] == 1
    assert sig["maxEigDefect"] <= 1e-10


def test_star_exchanges_middle_eigenspaces(random_middle):
    du = dualize(random_middle)
    T0 = t_derivative(random_middle, 0.0, order=0)[random_middle.inc]
    T0d = t_derivative(du, 0.0, order=0)[du.inc]
    S = du.model.S[du.inc][:, random_middle.inc]
    assert np.max(np.abs(T0d @ S + S @ T0)) <= 1e-10
    plus, minus = middle_split(T0)
    plus_d, minus_d = middle_split(T0d)
    assert plus.shape[1] == minus_d.shape[1] and minus.shape[1] == plus_d.shape[1]


def test_missing_blocks_reported():
    b = kunneth_table([1], [1, 1])
    with pytest.raises(ScenarioError, match="insufficient scattering data"):
        restriction_image(ClassifierInput(b), 1)


def test_classifier_from_dict_rejects_bad_shapes():
    b = kunneth_table([1], [1, 1])
    with pytest.raises(ScenarioError):
        classifier_from_dict(b, {"C": [{"p": 0, "k": 0, "matrix": [[1, 0], [0, 1]]}]})
    with pytest.raises(ScenarioError):
        classifier_from_dict(b, {"C": [{"p": 1, "k": 1, "matrix": [[1]]}]})


def random_psd(g, n, rank):
    A = g.normal(size=(n, rank)) + 1j * g.normal(size=(n, rank))
    return A @ A.conj().T


def random_input(bundle, seed):
    """User-supplied C for every lower block, random ranks; T0 a random involution."""
    g = np.random.default_rng(seed)
    inp = ClassifierInput(bundle)
    f = bundle.f
    for p in range(bundle.n + 2):
        for k in range(f + 1):
            h = bundle.dim(p - k, k)
            if not h:
                continue
            if 2 * k < f:
                inp.C[(p, k)] = random_psd(g, h, int(g.integers(0, h + 1)))
            elif 2 * k == f:
                Q, _ = np.linalg.qr(g.normal(size=(h, h)) + 1j * g.normal(size=(h, h)))
                signs = g.choice([-1.0, 1.0], size=h)
                inp.T0[p] = Q @ np.diag(signs) @ Q.conj().T
    return inp


BUNDLES = [([1], [1, 1]), ([1, 1], [1, 2, 1]), ([1, 0, 1], [1, 1]), ([1, 2, 1], [1, 3, 1]),
           ([1, 1], [1, 2, 2, 1])]


@settings(max_examples=25)
@given(st.sampled_from(BUNDLES), st.integers(0, 10_000))
def test_tag_count_equals_image_dimension(bb, seed):
    b = kunneth_table(*bb)
    inp = random_input(b, seed)
    rep = classification_report(inp)
    for deg in rep["degrees"]:
        tags = sum(t != "zero" for blk in deg["blocks"] for t in blk["basisTags"])
        assert tags == deg["dimAp"]


@settings(max_examples=25)
@given(st.sampled_from(BUNDLES), st.integers(0, 10_000))
def test_lower_and_upper_blocks_pair_up(bb, seed):
    b = kunneth_table(*bb)
    inp = random_input(b, seed)
    images = {p: {blk.k: blk for blk in restriction_image(inp, p)} for p in range(b.n + 2)}
    for (p, k), C in inp.C.items():
        lower = images[p][k]
        upper = images[b.n - p][b.f - k]
        assert lower.dim + upper.dim == b.dim(p - k, k)


@settings(max_examples=25)
@given(st.sampled_from([([1, 0, 1], [1, 1]), ([1, 1], [1, 0, 1]), ([1], [1, 1, 1, 1]),
                        ([1, 1], [1, 2, 1, 2, 1, 2, 1])]),
       st.integers(0, 10_000))
def test_signature_bases_are_eigenvectors(bb, seed):
    b = kunneth_table(*bb)
    assert (b.n + 1) % 4 == 0
    sig = signature_check(random_input(b, seed))
    assert sig["maxEigDefect"] <= 1e-10
    assert sig["dimWplus"] == sig["dimWminus"]


@pytest.mark.parametrize("name", ["random-4ch", "random-middle", "dirichlet-torus"])
def test_star_matrix_is_signed_permutation(name):
    S = dualize(scenario(name)).model.S
    assert np.array_equal(np.abs(S).sum(axis=0), np.ones(S.shape[1]))
    assert np.allclose(S @ S.T, np.eye(S.shape[0]))
