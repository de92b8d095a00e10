"""Classification of the image of H^p(X) -> H^p(M) from scattering data.

Input per degree p: the residues C~^[k] (k < f/2) at s = 2 d_k and, for even
f, the middle value T0 = T^[f/2](0).  The image splits over fiber degrees k:

    k <  f/2   im C~^[k]                    (degree p)
    k =  f/2   H+ = {T0 phi = phi}
    k >  f/2   * ker C~^[f-k]               (from degree n - p)

Its dimension is dim H_inf^p.  The classifier runs on matrices alone; the
pipeline helpers below fill it from scenarios.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .bundle import Channel, channels_for_degree, star_block
from .errors import InvariantViolation, ScenarioError
from .residues import contour_residue, default_rho, psd_split, residue_field
from .scatter import (Scenario, closes_on_sheet, contour_points, derivative_partner,
                      normal_block_from_tangential, outgoing_rates, solve_batch, t_derivative)

MEMBER_TOL = 1e-6


@dataclass
class ClassifierInput:
    bundle: object
    C: dict = field(default_factory=dict)     # (p, k) -> Hermitian PSD matrix, k < f/2
    T0: dict = field(default_factory=dict)    # p -> middle value, f even
    provenance: dict = field(default_factory=dict)
    rank_tol: float = 1e-8
    involution_tol: float = 1e-8
    scenarios: dict = field(default_factory=dict, repr=False)   # optional (p, k) -> Scenario

    def block_dim(self, p, k):
        return self.bundle.dim(p - k, k)

    def validate(self):
        for p, T in self.T0.items():
            T = np.asarray(T, dtype=complex)
            I = np.eye(len(T))
            inv = np.linalg.norm(T @ T - I, 2)
            adj = np.linalg.norm(T - T.conj().T, 2)
            if inv > self.involution_tol or adj > self.involution_tol:
                raise InvariantViolation("middle involution",
                                         f"degree {p}: |T0^2 - I| = {inv:.2e}, |T0 - T0*| = {adj:.2e}")


def middle_split(T0, tol=1e-8):
    """Orthonormal eigenbases of T0 for the eigenvalues +1 and -1."""
    T0 = np.atleast_2d(np.asarray(T0, dtype=complex))
    if T0.size == 0:
        return np.zeros((0, 0), complex), np.zeros((0, 0), complex)
    w, v = np.linalg.eigh((T0 + T0.conj().T) / 2)
    off = float(np.max(np.abs(np.abs(w) - 1)))
    if off > tol:
        raise InvariantViolation("middle involution", f"eigenvalue off +-1 by {off:.2e}")
    return v[:, w > 0], v[:, w < 0]


def _star_onto(bundle, p, k):
    """Star from the (n-p) - (f-k), f-k block onto the (p-k, k) block."""
    r = bundle.b - (p - k)
    src = Channel(r, bundle.f - k, 0.0, bundle.dim(r, bundle.f - k), False, bundle.f)
    return star_block(bundle, src)


@dataclass
class ApBlock:
    k: int
    kind: str          # residue | middle | star-kernel | empty
    dim_block: int
    basis: np.ndarray  # columns span the image block inside H^{p-k,k}
    complement: np.ndarray

    @property
    def dim(self):
        return self.basis.shape[1]


def restriction_image(inp, p):
    """Per fiber degree k: the block of the image in H^{p-k,k}."""
    b = inp.bundle
    f, n = b.f, b.n
    missing, blocks = [], []
    for k in range(0, f + 1):
        h = inp.block_dim(p, k) if 0 <= p - k <= b.b else 0
        if h == 0:
            blocks.append(ApBlock(k, "empty", 0, np.zeros((0, 0)), np.zeros((0, 0))))
            continue
        if 2 * k < f:
            if (p, k) not in inp.C:
                missing.append((p, k))
                continue
            ker, im = psd_split(inp.C[(p, k)], inp.rank_tol)
            blocks.append(ApBlock(k, "residue", h, im, ker))
        elif 2 * k == f:
            if p not in inp.T0:
                missing.append((p, k))
                continue
            plus, minus = middle_split(inp.T0[p], inp.involution_tol)
            blocks.append(ApBlock(k, "middle", h, plus, minus))
        else:
            key = (n - p, f - k)
            if key not in inp.C:
                missing.append(key)
                continue
            ker, im = psd_split(inp.C[key], inp.rank_tol)
            S = _star_onto(b, p, k)
            blocks.append(ApBlock(k, "star-kernel", h, S @ ker, S @ im))
    if missing:
        raise ScenarioError("insufficient scattering data: missing blocks (p, k) = "
                            + ", ".join(str(m) for m in sorted(set(missing))))
    return blocks


def h_inf_dimension(inp, p):
    if p < 0 or p > inp.bundle.n + 1:
        return 0
    return sum(blk.dim for blk in restriction_image(inp, p))


_TAGS = {"residue": "residue", "middle": "middleValue", "star-kernel": "valueAt2d"}


def xi_classify(inp, p, k, phi, tol=MEMBER_TOL, attach=False):
    """Tag of a unit vector phi in H^{p-k,k} and the projection witness.

    With ``attach`` and a scenario for (p, k) registered in ``inp.scenarios``
    the singular value itself is assembled and its norm reported.
    """
    phi = np.asarray(phi, dtype=complex)
    phi = phi / np.linalg.norm(phi)
    blk = next(bl for bl in restriction_image(inp, p) if bl.k == k)
    if blk.kind == "empty":
        raise ScenarioError(f"H^({p - k},{k}) is zero")
    proj_in = float(np.linalg.norm(blk.basis.conj().T @ phi)) if blk.dim else 0.0
    proj_out = float(np.linalg.norm(blk.complement.conj().T @ phi)) if blk.complement.size else 0.0
    witness = {"in": proj_in, "out": proj_out}
    if proj_out <= tol:
        tag = _TAGS[blk.kind]
    elif proj_in <= tol:
        tag = "zero"
    else:
        raise InvariantViolation("xi membership", f"ambiguous membership: projections {proj_in:.3g} / {proj_out:.3g}")
    if attach and (p, k) in inp.scenarios:
        scn = inp.scenarios[(p, k)]
        witness.update(singular_value(scn, blk.kind, tag, phi))
    return tag, witness


def xi_table(inp, p):
    """Tags of the adapted basis (image basis, then complement) per k."""
    out = {}
    for blk in restriction_image(inp, p):
        if blk.kind == "empty":
            continue
        vecs = np.concatenate([blk.basis, blk.complement], axis=1)
        out[blk.k] = [xi_classify(inp, p, blk.k, vecs[:, j])[0] for j in range(vecs.shape[1])]
    return out


# --- attached fields -----------------------------------------------------------------------

def regularized_value(scn, s0, rho=None, M=None):
    """Contour means of T and of the cavity coefficients at s0 (double loop at a branch point)."""
    M = M or scn.numerics.contour_M
    rho = rho or default_rho(scn, s0)
    pt0 = scn.point(s0)
    pts = contour_points(scn, pt0, rho, M)
    if not closes_on_sheet(scn, pts, rho, M):
        pts = contour_points(scn, pt0, rho, M, loops=2)
    data = solve_batch(scn, pts)
    return pt0, np.mean([d.T for d in data], axis=0), np.mean([d.coeffs for d in data], axis=0)


def _field_norm(scn, pt, t_full, coeffs, phi, incoming=True, u_max=6.0, n_u=61):
    o = outgoing_rates(scn, pt)
    u = np.linspace(0.0, u_max, n_u)
    vals = np.zeros((scn.dim, n_u), complex)
    t = t_full @ phi
    vals += t[:, None] * np.exp(np.outer(o, u))
    if incoming:
        vals[scn.inc] += phi[:, None] * np.exp(pt.incoming_rate * u)[None, :]
    nrm = float(np.max(np.abs(vals)))
    if scn.model.has_interior:
        _, inner = scn.model.interior(pt.lam, coeffs @ phi)
        nrm = max(nrm, float(np.max(np.abs(inner))))
    return nrm


def singular_value(scn, kind, tag, phi):
    """Norm of the assembled field behind a tag, with a closedness diagnostic.

    The closedness defect is the residue of the d-partner at the point, i.e.
    |diag(a + o) T phi| on the rows where the partner would have a pole.  For
    vertex models this is informational only: they are not derived from a
    complex of forms.
    """
    out = {}
    if kind == "residue":
        rd = contour_residue(scn, 2 * scn.d)
        cusp, u, vals = residue_field(scn, rd, phi)
        grid = cusp.values(np.linspace(0, 6, 61))
        out["field_norm"] = float(max(np.max(np.abs(grid)), np.max(np.abs(vals), initial=0.0)))
        return out
    s0 = 0.0 if kind == "middle" else 2 * scn.d
    pt, T, coeffs = regularized_value(scn, s0)
    out["field_norm"] = _field_norm(scn, pt, T, coeffs, phi)
    fac = scn.weights + outgoing_rates(scn, pt)
    out["closed_defect"] = float(np.max(np.abs(fac * (T @ phi))))
    return out


def middle_value_field_norm(scn, phi):
    """max |E(0, phi)| on the cavity and u in [0, 6] for the middle scenario."""
    if scn.d != 0:
        raise ScenarioError("E(0, phi) belongs to the middle fiber degree")
    pt, T, coeffs = regularized_value(scn, 0.0)
    return _field_norm(scn, pt, T, coeffs, np.asarray(phi, dtype=complex))


def exactness_check_lower(scn, phi):
    """Normal-incoming identity at s = 2 d_k.

    k < f/2: T_d(2d_k) phi against the normal block built from T(2d_k), with
    the factor 1 / (2 d_k).  k > f/2: the residue of the d-partner against
    diag(a + o) T(2d_k) phi.  Returns the max defect.
    """
    phi = np.asarray(phi, dtype=complex)
    part = derivative_partner(scn)
    P = part.model.S
    Sinc = P[part.inc][:, scn.inc]
    s0 = 2 * scn.d
    if 2 * scn.k < scn.f:
        pt, T, _ = regularized_value(scn, s0)
        _, Td, _ = regularized_value(part, s0)
        lhs = Td @ (Sinc @ phi)
        rhs = P @ (normal_block_from_tangential(scn, T, pt) @ phi)
        return float(np.max(np.abs(lhs - rhs)))
    if 2 * scn.k > scn.f:
        pt, T, _ = regularized_value(scn, s0)
        rd = contour_residue(part, s0)
        lhs = rd.C_full @ (Sinc @ phi)
        fac = scn.weights + outgoing_rates(scn, pt)
        rhs = P @ (fac * (T @ phi))
        return float(np.max(np.abs(lhs - rhs)))
    raise ScenarioError("the lower exactness statement needs k != f/2")


# --- signature ---------------------------------------------------------------------------------

def signature_check(inp, tol=1e-10):
    """W+/- bookkeeping in the middle degree h = (n + 1) / 2.

    For each k < f/2 the space J^k = im C~^[k] at degree h is paired with
    du ^ *J^k; tau_Z swaps the two through the star block.  Q+/- = (phi, +-S phi)
    are checked to be +-1 eigenvectors of the assembled tau_Z.
    """
    b = inp.bundle
    n = b.n
    if (n + 1) % 4:
        raise ScenarioError(f"signature needs dim X = {n + 1} divisible by 4")
    h = (n + 1) // 2
    per_k, dims, worst = [], 0, 0.0
    for k in range((b.f + 1) // 2):
        hk = inp.block_dim(h, k) if 0 <= h - k <= b.b else 0
        if hk == 0:
            continue
        if (h, k) not in inp.C:
            raise ScenarioError(f"insufficient scattering data: missing C at (p, k) = {(h, k)}")
        _, J = psd_split(inp.C[(h, k)], inp.rank_tol)
        src = Channel(h - k, k, 0.0, hk, False, b.f)
        S = star_block(b, src)
        tau = np.block([[np.zeros((hk, hk)), S.T], [S, np.zeros((hk, hk))]])
        if np.linalg.norm(tau @ tau - np.eye(2 * hk)) > tol:
            raise InvariantViolation("tau_Z involution", f"block k = {k}")
        Qp = np.concatenate([J, S @ J]) / np.sqrt(2)
        Qm = np.concatenate([J, -(S @ J)]) / np.sqrt(2)
        dp = float(np.max(np.abs(tau @ Qp - Qp), initial=0.0))
        dm = float(np.max(np.abs(tau @ Qm + Qm), initial=0.0))
        worst = max(worst, dp, dm)
        per_k.append({"k": k, "dimJ": J.shape[1], "eigDefectPlus": dp, "eigDefectMinus": dm})
        dims += J.shape[1]
    if worst > tol:
        raise InvariantViolation("Q+- eigenvectors", f"defect {worst:.2e}")
    return {"degree": h, "blocks": per_k, "dimWplus": dims, "dimWminus": dims,
            "signatureDifference": 0, "maxEigDefect": worst}


# --- pipeline and reports ----------------------------------------------------------------------

def classifier_from_pipeline(bundle, model_factory, numerics=None, keep_scenarios=True):
    """Compute C~^[k] at s = 2 d_k and T0 at s = 0 for every degree.

    ``model_factory(channels)`` returns the compact model for a channel list.
    """
    from .config import Numerics
    numerics = numerics or Numerics()
    inp = ClassifierInput(bundle, rank_tol=numerics.rank_tol, involution_tol=numerics.involution_tol)
    f, n = bundle.f, bundle.n
    for p in range(0, n + 1):
        chans = channels_for_degree(bundle, p)
        model = None
        for k in range(0, f + 1):
            if 2 * k > f or not (0 <= p - k <= bundle.b) or bundle.dim(p - k, k) == 0:
                continue
            model = model or model_factory(chans)
            scn = Scenario(bundle, model, p, k, numerics=numerics, name=f"p={p},k={k}")
            if 2 * k < f:
                inp.C[(p, k)] = contour_residue(scn, 2 * scn.d).C
                inp.provenance[(p, k)] = "computed"
            else:
                inp.T0[p] = t_derivative(scn, 0.0, order=0)[scn.inc]
                inp.provenance[(p, "T0")] = "computed"
            if keep_scenarios:
                inp.scenarios[(p, k)] = scn
    return inp


def _mat(m):
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _unmat(obj):
    arr = np.array(obj, dtype=float)
    if arr.ndim == 3:
        return arr[..., 0] + 1j * arr[..., 1]
    return arr.astype(complex)


def classifier_from_dict(bundle, doc):
    """{"C": [{"p", "k", "matrix"}], "T0": [{"p", "matrix"}]}; entries real or [re, im]."""
    inp = ClassifierInput(bundle, rank_tol=doc.get("rankTol", 1e-8), involution_tol=doc.get("involutionTol", 1e-8))
    for e in doc.get("C", []):
        p, k = int(e["p"]), int(e["k"])
        if 2 * k >= bundle.f:
            raise ScenarioError(f"C entries need k < f/2, got k = {k}")
        mat = _unmat(e["matrix"])
        if mat.shape != (bundle.dim(p - k, k),) * 2:
            raise ScenarioError(f"C at (p, k) = ({p}, {k}) must be {bundle.dim(p - k, k)}-dimensional")
        inp.C[(p, k)] = mat
        inp.provenance[(p, k)] = "user-supplied"
    for e in doc.get("T0", []):
        p = int(e["p"])
        inp.T0[p] = _unmat(e["matrix"])
        inp.provenance[(p, "T0")] = "user-supplied"
    return inp


def classification_report(inp):
    """Per degree p and fiber degree k: dims and tags; plus the signature block if applicable."""
    inp.validate()
    b = inp.bundle
    degrees = []
    for p in range(0, b.n + 2):
        blocks = restriction_image(inp, p)
        tags = xi_table(inp, p)
        dim_ap = sum(bl.dim for bl in blocks)
        count = sum(t != "zero" for ts in tags.values() for t in ts)
        if count != dim_ap:
            raise InvariantViolation("xi tag count", f"degree {p}: {count} tags vs dim A = {dim_ap}")
        degrees.append({
            "p": p,
            "blocks": [{"k": bl.k, "kind": bl.kind, "dimBlock": bl.dim_block, "dim": bl.dim,
                        "basisTags": tags.get(bl.k, [])} for bl in blocks if bl.kind != "empty"],
            "dimAp": dim_ap, "dimHinf": dim_ap})
    report = {"degrees": degrees,
              "provenance": sorted({str(v) for v in inp.provenance.values()})}
    if (b.n + 1) % 4 == 0:
        report["signature"] = signature_check(inp)
    return report


def write_report(path, report):
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
