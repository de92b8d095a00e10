"""Acceptance criteria 1-10 at their stated tolerances.

Each test records one line through ``record``; conftest prints the lines in
the terminal summary.  Run this file directly for the lines alone.
"""
import time

import numpy as np
import pytest

from cuspidal.bundle import kunneth_table
from cuspidal.cusp import apply_resolvent, resolvent_kernel
from cuspidal.hodge import (classification_report, classifier_from_pipeline, h_inf_dimension,
                            middle_split, middle_value_field_norm, signature_check)
from cuspidal.msrel import ms_grid
from cuspidal.residues import (contour_residue, pole_scan, rectangle_sweep, residue_invariants,
                               residue_pairing_check)
from cuspidal.scatter import (deck_equation_check, derivative_partner, dualize, fftmat_check, solve_batch,
                              star_duality_check, t_derivative)
from cuspidal.scenarios import BUILTIN_NAMES, ScenarioFile, builtin_doc

import oracles
from conftest import scenario, scenario_file
from test_cusp import REF, fd_residual
from test_hodge import random_input

RESULTS = {}


def record(n, ok, detail):
    RESULTS[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, RESULTS[n]


def middle_scenario(name):
    doc = builtin_doc(name)
    doc["incoming"]["k"] = doc["bundle"]["f"] // 2
    return ScenarioFile(doc).scenario()


def f_even_builtins():
    return [n for n in BUILTIN_NAMES if builtin_doc(n)["bundle"]["f"] % 2 == 0]


@pytest.fixture(scope="module")
def poles():
    """Scan results for every built-in whose incoming block sits below the middle."""
    out = {}
    for name in BUILTIN_NAMES:
        scn = scenario(name)
        if 2 * scn.k < scn.bundle.f:
            out[name] = (scn, pole_scan(scn).poles)
    return out


def test_c1_scattering_oracle():
    t0 = time.perf_counter()
    scn = scenario("closed-form")
    s = (np.linspace(0.5, 1.2, 20)[:, None] + 1j * np.linspace(-0.3, 0.3, 10)[None]).ravel()
    data = solve_batch(scn, [scn.point(z) for z in s])
    worst = 0.0
    for z, dat in zip(s, data):
        t = complex(oracles.t_closed(z))
        worst = max(worst, abs(dat.T[scn.inc][0, 0] - t) / abs(t))
    dt = time.perf_counter() - t0
    record(1, worst <= 1e-8 and dt < 5, f"max rel error {worst:.2e} over {s.size} points in {dt:.2f} s")


def test_c2_maass_selberg():
    t0 = time.perf_counter()
    worst = 0.0
    for name in ("random-4ch", "random-middle"):
        sf = scenario_file(name)
        scn = sf.scenario()
        worst = max(worst, max(m.rel_error for m in ms_grid(scn, (0.03, 0.09), (2.0, 5.0, 10.0), sf.phi(scn))))
    dt = time.perf_counter() - t0
    record(2, worst <= 1e-6 and dt < 30, f"max verify_ms {worst:.2e} in {dt:.2f} s")


def test_c3_residue_pairing():
    scn = scenario("tuned-well")
    found = pole_scan(scn).poles
    loc = abs(found[0] - oracles.frozen("well_pole")) if len(found) == 1 else np.inf
    rd = contour_residue(scn, found[0])
    basis = np.eye(scn.m)
    pair = max(residue_pairing_check(scn, rd, a, b) for a in basis for b in basis)
    tol = 1e-6 * (1 + np.linalg.norm(rd.C, 2))
    record(3, pair <= tol and loc <= 1e-8, f"pairing defect {pair:.2e} (tol {tol:.2e}), pole offset {loc:.2e}")


def test_c4_pole_confinement_and_order(poles):
    floor_ok, cert, worst_sigma = True, 0.0, np.inf
    for name, (scn, found) in poles.items():
        sigma, _ = rectangle_sweep(scn, nx=20, ny=6)
        worst_sigma = min(worst_sigma, sigma / scn.numerics.sigma_floor)
        floor_ok &= sigma >= scn.numerics.sigma_floor
        for s0 in found:
            cert = max(cert, contour_residue(scn, s0).order_certificate)
    mid = 0.0
    for name in f_even_builtins():
        m = middle_scenario(name)
        mid = max(mid, float(np.max(np.abs(contour_residue(m, 2 * m.d, check=False).C_full))))
    record(4, floor_ok and cert <= 1e-7 and mid <= 1e-8,
           f"min sigma/floor {worst_sigma:.2e}, order certificate {cert:.2e}, middle residue {mid:.2e}")


def test_c5_residue_algebra(poles):
    herm, eig, count = 0.0, np.inf, 0
    for name, (scn, found) in poles.items():
        for s0 in found:
            inv = residue_invariants(contour_residue(scn, s0))
            herm = max(herm, inv["hermitian_defect"] / max(inv["norm"], 1e-300))
            eig = min(eig, inv["min_eig"])
            count += 1
    ok = count > 0 and herm <= 1e-9 and eig >= -1e-10
    record(5, ok, f"{count} residues, rel Hermitian defect {herm:.2e}, min eigenvalue {eig:.2e}")


def test_c6_middle_involution():
    inv, adj, names = 0.0, 0.0, f_even_builtins()
    for name in names:
        m = middle_scenario(name)
        T0 = t_derivative(m, 0.0, order=0)[m.inc]
        inv = max(inv, float(np.linalg.norm(T0 @ T0 - np.eye(m.m), 2)))
        adj = max(adj, float(np.linalg.norm(T0 - T0.conj().T, 2)))
    record(6, inv <= 1e-8 and adj <= 1e-8,
           f"{len(names)} scenarios, |T0^2 - I| {inv:.2e}, |T0 - T0*| {adj:.2e}")


def test_c7_functional_equations():
    deck = fft = star = 0.0
    for name in ("closed-form", "tuned-well", "random-nu"):
        scn = scenario(name)
        dp = derivative_partner(scn)
        for s in (scn.d + 0.21 + 0.07j, scn.d + 0.35, scn.d + 0.13 - 0.05j):
            deck = max(deck, deck_equation_check(scn, scn.point(s), np.ones(scn.m)))
            fft = max(fft, fftmat_check(dp, s))
    for name in ("closed-form", "random-4ch", "random-nu", "dirichlet-torus"):
        scn = scenario(name)
        du = dualize(scn)
        for s in (scn.d + 0.21 + 0.07j, scn.d + 0.4):
            star = max(star, star_duality_check(du, s))
    record(7, deck <= 1e-7 and fft <= 1e-7 and star <= 1e-8,
           f"deck {deck:.2e}, normal block {fft:.2e}, star {star:.2e}")


def test_c8_resolvent_kernel():
    errs = [fd_residual(0.1 + 0.3j, n) for n in (200, 400, 800)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    g = np.random.default_rng(0)
    exact = True
    for u, r, x, y in g.uniform([0.01, 0.01, -1, 0.01], [5, 5, 1, 1], size=(200, 4)):
        lam = complex(x, y)
        exact &= resolvent_kernel(REF, lam, 0.0, r) == 0
        exact &= resolvent_kernel(REF, lam, u, r) == resolvent_kernel(REF, lam, r, u)
    ok = bool(np.all((orders >= 1.8) & (orders <= 2.2))) and exact
    record(8, ok, f"observed orders {np.round(orders, 3).tolist()}, boundary and symmetry exact: {exact}")


FAMILIES = [("dirichlet-cone", [1], [1, 1]), ("neumann-cone", [1], [1, 1]),
            ("dirichlet-torus", [1, 1], [1, 2, 1]), ("neumann-torus", [1, 1], [1, 2, 1])]


@pytest.fixture(scope="module")
def pipelines():
    out = {}
    for name in [f[0] for f in FAMILIES] + ["random-middle", "tuned-harmonic"]:
        sf = scenario_file(name)
        out[name] = classifier_from_pipeline(sf.bundle, sf.model_for, sf.numerics)
    return out


def test_c9_classification(pipelines):
    tables = tags = True
    hminus = 0.0
    for name, bB, bF in FAMILIES:
        inp = pipelines[name]
        dims = [h_inf_dimension(inp, p) for p in range(inp.bundle.n + 2)]
        tables &= dims == oracles.vertex_family_dims(bB, bF, name.split("-")[0])
        rep = classification_report(inp)
        for deg in rep["degrees"]:
            tags &= sum(t != "zero" for blk in deg["blocks"] for t in blk["basisTags"]) == deg["dimAp"]
    for name in ("dirichlet-torus", "random-middle"):
        inp = pipelines[name]
        for p, T0 in inp.T0.items():
            _, minus = middle_split(T0)
            scn = inp.scenarios[(p, inp.bundle.f // 2)]
            for j in range(minus.shape[1]):
                hminus = max(hminus, middle_value_field_norm(scn, minus[:, j]))
    record(9, tables and tags and hminus <= 1e-8,
           f"tables match: {tables}, tag counts match: {tags}, max |E(0, H-)| {hminus:.2e}")


def test_c10_signature(pipelines):
    defect, equal, count = 0.0, True, 0
    inputs = [pipelines[n] for n in ("tuned-harmonic", "dirichlet-torus", "neumann-torus", "random-middle")]
    for bb in [([1, 0, 1], [1, 1]), ([1, 1], [1, 0, 1]), ([1, 1], [1, 2, 1, 2, 1, 2, 1])]:
        inputs += [random_input(kunneth_table(*bb), seed) for seed in range(5)]
    for inp in inputs:
        assert (inp.bundle.n + 1) % 4 == 0
        sig = signature_check(inp)
        defect = max(defect, sig["maxEigDefect"])
        equal &= sig["dimWplus"] == sig["dimWminus"]
        count += 1
    record(10, defect <= 1e-10 and equal, f"{count} inputs, eigenvector defect {defect:.2e}, dims equal: {equal}")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
