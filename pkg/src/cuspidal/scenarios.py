"""Scenario documents: JSON parsing, validation and the built-in suite.

A scenario is one JSON object

    {"name": ..., "bundle": {"f", "b", "h", "nuLists", "starSigns"},
     "model": {"L", "V", "leftBC", "vertex"}, "degree": p,
     "incoming": {"k", "normal"}, "numerics": {...}, "stages": [...],
     "ms": {"taus", "rs", "phi"}}

nuLists and starSigns are keyed by "r,s".  V is one of
{"kind": "zero"}, {"kind": "constant", "matrix"}, {"kind": "piecewise",
"breaks", "matrices"}, {"kind": "samples", "file"} or {"kind": "samples",
"u", "samples"}, {"kind": "smooth-random", "seed", "scale", "modes"} and
{"kind": "channel-constant", "entries": [{"s", "normal", "value"}]}.  Matrix
entries are numbers or [re, im] pairs.
"""
from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .bundle import BundleData, channels_for_degree, kunneth_table
from .cavity import (CompactModel, ConstantPotential, PiecewisePotential, SampledPotential,
                     SmoothRandomPotential, ZeroPotential, load_potential_csv)
from .config import Numerics
from .errors import ScenarioError
from .scatter import Scenario

STAGES = ("sweep", "scan", "residues", "ms", "classify")
DEGREE_FREE_V = ("zero", "smooth-random", "channel-constant")

_NUMERIC_KEYS = {
    "hMax": "h_max", "halvingTol": "halving_tol", "derivRho": "deriv_rho", "rankTol": "rank_tol",
    "condMax": "cond_max", "sigmaFloor": "sigma_floor", "poleMargin": "pole_margin",
    "scanPoints": "scan_points", "involutionTol": "involution_tol", "tailEps": "tail_eps",
}


def _matrix(obj, what):
    try:
        arr = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{what}: not a numeric matrix") from exc
    if arr.ndim >= 1 and arr.shape[-1:] == (2,) and arr.ndim in (3, 4):
        return arr[..., 0] + 1j * arr[..., 1]
    return arr.astype(complex)


def _key(rs, what):
    try:
        r, s = (int(x) for x in str(rs).split(","))
    except ValueError as exc:
        raise ScenarioError(f"{what} key {rs!r} must look like 'r,s'") from exc
    return r, s


def parse_bundle(doc):
    try:
        f, b, h = int(doc["f"]), int(doc["b"]), doc["h"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bundle needs integer f, b and a table h ({exc})") from exc
    nus = {_key(k, "nuLists"): tuple((float(v), int(m)) for v, m in vals)
           for k, vals in doc.get("nuLists", {}).items()}
    signs = {_key(k, "starSigns"): int(v) for k, v in doc.get("starSigns", {}).items()}
    if any(v not in (1, -1) for v in signs.values()):
        raise ScenarioError("starSigns entries must be +1 or -1")
    return BundleData(f=f, b=b, h=tuple(tuple(row) for row in h), nu_lists=nus, star_signs=signs)


def parse_numerics(doc):
    kw = {}
    for k, v in (doc or {}).items():
        if k == "contour":
            if "rho" in v:
                kw["contour_rho"] = v["rho"]
            if "M" in v:
                kw["contour_M"] = v["M"]
        elif k == "tolerances":
            for kk, vv in v.items():
                if kk not in _NUMERIC_KEYS:
                    raise ScenarioError(f"unknown tolerance {kk!r}")
                kw[_NUMERIC_KEYS[kk]] = vv
        elif k in _NUMERIC_KEYS:
            kw[_NUMERIC_KEYS[k]] = v
        else:
            raise ScenarioError(f"unknown numerics field {k!r}")
    return Numerics(**kw)


def _bc(obj, what):
    if isinstance(obj, str):
        if obj not in ("dirichlet", "neumann", "transparent"):
            raise ScenarioError(f"{what} must be dirichlet, neumann, transparent or {{'robin': R}}")
        return obj
    if isinstance(obj, dict) and "robin" in obj:
        return ("robin", _matrix(obj["robin"], f"{what} Robin matrix"))
    raise ScenarioError(f"malformed {what}: {obj!r}")


def potential_for(spec, channels, L, base_dir="."):
    """Build the potential of ``spec`` for a concrete channel list."""
    n = sum(c.mult for c in channels)
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return ZeroPotential(n)
    if kind == "constant":
        return ConstantPotential(_matrix(spec["matrix"], "constant potential"))
    if kind == "piecewise":
        return PiecewisePotential(spec["breaks"], [_matrix(m, "piecewise block") for m in spec["matrices"]])
    if kind == "samples":
        if "file" in spec:
            return load_potential_csv(os.path.join(base_dir, spec["file"]), n)
        return SampledPotential(np.array(spec["u"], float), _matrix(spec["samples"], "potential samples"))
    if kind == "smooth-random":
        return SmoothRandomPotential(n, L, int(spec.get("seed", 0)), float(spec.get("scale", 0.3)),
                                     int(spec.get("modes", 3)), float(spec.get("offset", 0.0)))
    if kind == "channel-constant":
        diag = []
        for c in channels:
            val = 0.0
            for e in spec.get("entries", []):
                if int(e["s"]) == c.s and bool(e.get("normal", False)) == c.normal and float(e.get("nu", 0.0)) == c.nu:
                    val = float(e["value"])
            diag += [val] * c.mult
        return ConstantPotential(np.diag(diag).astype(complex))
    raise ScenarioError(f"unknown potential kind {kind!r}")


@dataclass
class ScenarioFile:
    doc: dict
    base_dir: str = "."

    def __post_init__(self):
        d = self.doc
        if not isinstance(d, dict):
            raise ScenarioError("scenario must be a JSON object")
        for key in ("bundle", "model", "degree", "incoming"):
            if key not in d:
                raise ScenarioError(f"scenario is missing {key!r}")
        self.name = str(d.get("name", "scenario"))
        self.bundle = parse_bundle(d["bundle"])
        self.numerics = parse_numerics(d.get("numerics"))
        m = d["model"]
        self.L = float(m.get("L", 1.0))
        if self.L <= 0:
            raise ScenarioError("model.L must be positive")
        self.V = m.get("V", {"kind": "zero"})
        self.left_bc = _bc(m.get("leftBC", "dirichlet"), "leftBC")
        self.vertex = _bc(m.get("vertex", "transparent"), "vertex")
        if self.left_bc == "transparent":
            raise ScenarioError("leftBC cannot be transparent")
        try:
            self.p = int(d["degree"])
            self.k = int(d["incoming"]["k"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"degree and incoming.k must be integers ({exc})") from exc
        self.normal = bool(d["incoming"].get("normal", False))
        self.stages = list(d.get("stages", STAGES))
        bad = [s for s in self.stages if s not in STAGES]
        if bad:
            raise ScenarioError(f"unknown stages {bad}")
        ms = d.get("ms", {})
        self.ms_taus = [float(t) for t in ms.get("taus", [0.03, 0.09])]
        self.ms_rs = [float(r) for r in ms.get("rs", [2.0, 5.0, 10.0])]
        self.ms_phi = ms.get("phi")
        self.scenario()   # validates the whole chain eagerly

    def model_for(self, channels):
        V = potential_for(self.V, channels, self.L, self.base_dir)
        return CompactModel(self.L, channels, V, self.left_bc, self.vertex,
                            self.numerics.h_max, self.numerics.halving_tol)

    def model_factory_ok(self):
        return self.vertex != "transparent" or self.V.get("kind", "zero") in DEGREE_FREE_V

    def scenario(self):
        chans = channels_for_degree(self.bundle, self.p)
        if not chans:
            raise ScenarioError(f"no channels at degree {self.p}")
        return Scenario(self.bundle, self.model_for(chans), self.p, self.k, self.normal,
                        self.numerics, name=self.name)

    def phi(self, scn):
        if self.ms_phi is None:
            return np.ones(scn.m, complex) / np.sqrt(scn.m)
        phi = np.asarray(_matrix(self.ms_phi, "ms.phi")).reshape(-1)
        if phi.size != scn.m:
            raise ScenarioError(f"ms.phi has {phi.size} entries, the incoming block {scn.m}")
        return phi

    def digest(self):
        text = json.dumps(self.doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def load_scenario(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: malformed JSON ({exc})") from exc
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    return ScenarioFile(doc, os.path.dirname(os.path.abspath(path)))


# --- built-in suite ----------------------------------------------------------------------------

def harmonic_well_depth(d, L=1.0):
    """Depth V0 of a constant well -V0 (Dirichlet left end) with a pole exactly at s = 2d.

    At lambda = 0 the channel decays like e^{-d u}, so the cavity DtN value
    kappa cot(kappa L), kappa = sqrt(V0 - d^2), must equal -d.
    """
    g = lambda V0: np.sqrt(V0 - d * d) / np.tan(np.sqrt(V0 - d * d) * L) + d
    lo = d * d + (np.pi / (2 * L)) ** 2 + 1e-9
    hi = d * d + (np.pi / L) ** 2 - 1e-9
    return float(brentq(g, lo, hi, xtol=1e-15))


def _bundle_doc(betti_B, betti_F, **extra):
    b = kunneth_table(betti_B, betti_F)
    out = {"f": b.f, "b": b.b, "h": [list(r) for r in b.h]}
    out.update(extra)
    return out


def _builtin_docs():
    S1_pt = _bundle_doc([1], [1, 1])
    T2_S1 = _bundle_doc([1, 1], [1, 2, 1])
    S1_S2 = _bundle_doc([1, 0, 1], [1, 1])
    fast = {"scanPoints": 200}
    docs = {
        "closed-form": {
            "bundle": S1_pt, "model": {"L": 1.0, "V": {"kind": "zero"}, "leftBC": "dirichlet"},
            "degree": 0, "incoming": {"k": 0}, "stages": ["sweep", "scan", "residues", "ms"]},
        "dirichlet-cone": {
            "bundle": S1_pt, "model": {"L": 1.0, "vertex": "dirichlet"},
            "degree": 0, "incoming": {"k": 0}, "numerics": fast},
        "neumann-cone": {
            "bundle": S1_pt, "model": {"L": 1.0, "vertex": "neumann"},
            "degree": 0, "incoming": {"k": 0}, "numerics": fast},
        "dirichlet-torus": {
            "bundle": T2_S1, "model": {"L": 1.0, "vertex": "dirichlet"},
            "degree": 1, "incoming": {"k": 0}, "numerics": fast},
        "neumann-torus": {
            "bundle": T2_S1, "model": {"L": 1.0, "vertex": "neumann"},
            "degree": 1, "incoming": {"k": 0}, "numerics": fast},
        "tuned-well": {
            "bundle": S1_pt,
            "model": {"L": 1.0, "V": {"kind": "constant", "matrix": [[-3.1]]}, "leftBC": "dirichlet"},
            "degree": 0, "incoming": {"k": 0}, "stages": ["sweep", "scan", "residues", "ms"]},
        "tuned-well-2ch": {
            "bundle": {"f": 1, "b": 0, "h": [[2, 2]]},
            "model": {"L": 1.0, "V": {"kind": "channel-constant", "entries": [{"s": 0, "value": -3.1}]}},
            "degree": 0, "incoming": {"k": 0}, "stages": ["sweep", "scan", "residues", "ms"]},
        "random-4ch": {
            "bundle": T2_S1,
            "model": {"L": 1.0, "V": {"kind": "smooth-random", "seed": 7, "scale": 0.3}},
            "degree": 1, "incoming": {"k": 0}, "stages": ["sweep", "scan", "residues", "ms"]},
        "random-middle": {
            "bundle": T2_S1,
            "model": {"L": 1.0, "V": {"kind": "smooth-random", "seed": 7, "scale": 0.3}},
            "degree": 1, "incoming": {"k": 1}, "stages": ["sweep", "scan", "ms"]},
        "random-nu": {
            "bundle": _bundle_doc([1], [1, 1], nuLists={"0,0": [[0.5, 1]], "0,1": [[0.5, 1]]}),
            "model": {"L": 1.0, "V": {"kind": "smooth-random", "seed": 3, "scale": 0.4}},
            "degree": 0, "incoming": {"k": 0}, "stages": ["sweep", "scan", "residues", "ms"]},
        "tuned-harmonic": {
            "bundle": S1_S2,
            "model": {"L": 1.0, "V": {"kind": "channel-constant",
                                      "entries": [{"s": 0, "value": -harmonic_well_depth(0.5)}]}},
            "degree": 2, "incoming": {"k": 0}, "numerics": fast},
    }
    for name, doc in docs.items():
        doc["name"] = name
    return docs


BUILTIN_NAMES = tuple(_builtin_docs())


def builtin(name):
    docs = _builtin_docs()
    if name not in docs:
        raise ScenarioError(f"unknown built-in scenario {name!r}; choose from {', '.join(docs)}")
    return ScenarioFile(copy.deepcopy(docs[name]))


def builtin_doc(name):
    return copy.deepcopy(_builtin_docs()[name])
