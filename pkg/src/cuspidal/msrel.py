"""Maass-Selberg relations: the norm of the cut-off eigenform E^r(tau, phi).

Every model channel is fiber-harmonic, so E^r is E on the cavity and on
[0, r] and vanishes beyond.  The left side is computed by quadrature on the
cavity plus exact exponential integrals on [0, r]; the right side is the
closed form in terms of T(tau) and its lambda-derivative.

Right side, k != f/2, q = sqrt(d_k^2 - tau):

    e^{2qr}/(2q) |phi|^2 + 2r Re<T phi, phi> + 2q Re<T' phi, phi>
      + r |T_m phi|^2 + 2 sqrt(tau) Im<T'_m phi, T_m phi>
      - sum_closed e^{-2r w_c}/(2 w_c) |t_c|^2,        w_c = sqrt(theta_c - tau)

Right side, k = f/2, w = sqrt(tau):

    r (|phi|^2 + |T_m phi|^2) + 2w Im<T'_m phi, T_m phi>
      + (e^{2iwr} <T phi, phi> - e^{-2iwr} <phi, T phi>) / (2iw)
      - sum_closed e^{-2r w_c}/(2 w_c) |t_c|^2

T is the reference block, T_m the rows of all channels at the middle
threshold 0 (open for tau > 0) and T' = dT/dlambda along the upper edge.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .branchcut import same_threshold
from .cusp import inner_segment, l2_norm_segment
from .errors import PoleProximity, ScenarioError
from .scatter import default_deriv_rho, eigenform, scatter, t_derivative


@dataclass
class MSResult:
    tau: float
    r: float
    lhs: float
    rhs: float
    rel_error: float
    truncation_bound: float


def ms_point(scn, tau):
    """Spectral point over real tau on the upper edge of the physical sheet."""
    tau = float(tau)
    if not 0 < tau < scn.tau1:
        raise ScenarioError(f"tau must lie in (0, tau_1 = {scn.tau1:g}), got {tau}")
    if scn.d > 0:
        return scn.point(scn.d + np.sqrt(scn.d ** 2 - tau))
    return scn.point(-1j * np.sqrt(tau))


def ms_lhs(scn, tau, r, phi):
    """|E^r(tau, phi)|^2: Simpson on the cavity, exact on [0, r]."""
    phi = np.asarray(phi, dtype=complex)
    if not np.any(phi):
        return 0.0
    if r <= 0:
        raise ScenarioError("cut-off r must be positive")
    E = eigenform(scn, ms_point(scn, tau), phi)
    val = l2_norm_segment(E.cusp, 0.0, r)
    if E.u_int.size:
        val += float(simpson(np.sum(np.abs(E.interior) ** 2, axis=0), x=E.u_int))
    return val


def _middle_rows(scn):
    th = scn.thetas
    return np.array([same_threshold(t, 0.0) for t in th])


def ms_terms(scn, tau, r, phi, data=None, dT=None):
    """Individual right-side terms and the truncation bound, as a dict."""
    phi = np.asarray(phi, dtype=complex)
    pt = ms_point(scn, tau)
    data = data or scatter(scn, pt)
    if dT is None:
        dT = t_derivative(scn, pt.s, order=1, pt=pt)
    t = data.T @ phi
    tp = dT @ phi
    inc = scn.inc
    mid = _middle_rows(scn)
    w = np.sqrt(tau)
    terms = {}
    if scn.d > 0:
        q = np.sqrt(scn.d ** 2 - tau)
        terms["leading"] = np.exp(2 * q * r) / (2 * q) * np.vdot(phi, phi).real
        terms["linear"] = 2 * r * np.vdot(phi, t[inc]).real + r * np.vdot(t[mid], t[mid]).real
        terms["derivative"] = (2 * q * np.vdot(phi, tp[inc]).real
                               + 2 * w * np.vdot(t[mid], tp[mid]).imag)
        terms["oscillatory"] = 0.0
    else:
        terms["leading"] = 0.0
        terms["linear"] = r * (np.vdot(phi, phi).real + np.vdot(t[mid], t[mid]).real)
        terms["derivative"] = 2 * w * np.vdot(t[mid], tp[mid]).imag
        tf, ft = np.vdot(phi, t[inc]), np.vdot(t[inc], phi)
        terms["oscillatory"] = ((np.exp(2j * w * r) * tf - np.exp(-2j * w * r) * ft) / (2j * w)).real
    closed = ~mid
    wc = np.sqrt(scn.thetas[closed] - tau)
    amp = np.abs(t[closed]) ** 2 * np.exp(-2 * r * wc) / (2 * wc)
    keep = np.exp(-2 * r * wc) >= scn.numerics.tail_eps
    terms["decaying"] = -float(np.sum(amp[keep]))
    terms["truncation_bound"] = float(np.sum(amp[~keep]))
    return terms


def ms_rhs(scn, tau, r, phi, data=None, dT=None):
    terms = ms_terms(scn, tau, r, phi, data, dT)
    return float(sum(v for k, v in terms.items() if k != "truncation_bound"))


def _check_poles(scn, tau, poles):
    s = ms_point(scn, tau).s
    for p in poles or ():
        if abs(s - p) < scn.numerics.pole_margin:
            raise PoleProximity(f"tau = {tau:g} (s = {s.real:.6g}) lies within {scn.numerics.pole_margin:g} of the pole {p:.10g}", s=s)


def derivative_at(scn, tau, poles=None):
    """dT/dlambda at real tau; the contour stays clear of the known poles."""
    pt = ms_point(scn, tau)
    rho = default_deriv_rho(scn, pt.s)
    for p in poles or ():
        rho = min(rho, 0.5 * abs(pt.s - p))
    return t_derivative(scn, pt.s, order=1, pt=pt, rho=rho)


def verify_ms(scn, tau, r, phi, poles=None):
    """|lhs - rhs| / max(lhs, 1) after refusing tau next to a known pole."""
    _check_poles(scn, tau, poles)
    lhs = ms_lhs(scn, tau, r, phi)
    terms = ms_terms(scn, tau, r, phi, dT=derivative_at(scn, tau, poles))
    rhs = float(sum(v for k, v in terms.items() if k != "truncation_bound"))
    return MSResult(float(tau), float(r), lhs, rhs, abs(lhs - rhs) / max(lhs, 1.0), terms["truncation_bound"])


def ms_grid(scn, taus, rs, phi, poles=None):
    """MSResult for every (tau, r); T and T' are computed once per tau."""
    out = []
    for tau in taus:
        _check_poles(scn, tau, poles)
        pt = ms_point(scn, tau)
        data = scatter(scn, pt)
        dT = derivative_at(scn, tau, poles)
        for r in rs:
            lhs = ms_lhs(scn, tau, r, phi)
            terms = ms_terms(scn, tau, r, phi, data, dT)
            rhs = float(sum(v for k, v in terms.items() if k != "truncation_bound"))
            out.append(MSResult(float(tau), float(r), lhs, rhs, abs(lhs - rhs) / max(lhs, 1.0),
                                terms["truncation_bound"]))
    return out


def write_ms_csv(path, results):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau", "r", "lhs", "rhs", "relError", "truncationBound"])
        for m in results:
            w.writerow(["%.17g" % v for v in (m.tau, m.r, m.lhs, m.rhs, m.rel_error, m.truncation_bound)])


def ms_bracket(scn, tau, phi):
    """q (<T phi, phi> - <phi, T phi>) on the reference block at real tau, k != f/2.

    Zero when T(tau) is self-adjoint; with open middle channels it equals
    i sqrt(tau) |T_m phi|^2.
    """
    if scn.d == 0:
        raise ScenarioError("the bracket term belongs to the k != f/2 relation")
    phi = np.asarray(phi, dtype=complex)
    pt = ms_point(scn, tau)
    t = scatter(scn, pt).T @ phi
    q = np.sqrt(scn.d ** 2 - tau)
    return complex(q * (np.vdot(phi, t[scn.inc]) - np.vdot(t[scn.inc], phi)))


def g4_defect(scn, s_hat, s, phi, psi, r):
    """Two-point identity for truncated eigenforms at lambda_1 != conj(lambda_2).

    Green's formula on [-L, r] turns (E^r(s_hat, phi), E^r(s, psi)) into
    sum over cusp term pairs c_i conj(c_j) e^{(rho_i + conj rho_j) r} / (rho_i + conj rho_j);
    the incoming-incoming pair is the e^{(s_hat + conj s - 2 d_k) r} term.
    Returns |quadrature - closed form| / max(1, |closed form|).
    """
    p1, p2 = scn.point(s_hat), scn.point(s)
    if abs(p1.lam - np.conj(p2.lam)) < 1e-12:
        raise ScenarioError("the two-point identity needs lambda_1 != conj(lambda_2)")
    E1 = eigenform(scn, p1, phi)
    E2 = eigenform(scn, p2, psi)
    quad = inner_segment(E1.cusp, E2.cusp, 0.0, r)
    if E1.u_int.size:
        quad += complex(simpson(np.sum(E1.interior * np.conj(E2.interior), axis=0), x=E1.u_int))
    F, G = E1.cusp, E2.cusp
    same = F.coord[:, None] == G.coord[None, :]
    sig = F.rate[:, None] + np.conj(G.rate)[None, :]
    cc = F.coef[:, None] * np.conj(G.coef)[None, :]
    live = same & (cc != 0)
    closed = complex(np.sum(cc[live] * np.exp(sig[live] * r) / sig[live]))
    return abs(quad - closed) / max(1.0, abs(closed))
