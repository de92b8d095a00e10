"""Generalized eigenforms by matching cusp exponentials to the cavity.

At a spectral point the eigenform with incoming datum phi is

    cusp:   phi exp((s - d_k) u) on the incoming block + sum_c t_c exp(o_c u)
    cavity: Y(u) c

and continuity of value and derivative at u = 0 gives

    (Y'(0) - diag(o) Y(0)) c = (iota - o) P phi,     t = Y(0) c - P phi,

which is the DtN system (diag(o) - N) t = (N - iota) P phi multiplied through
by Y(0).  The unreduced form stays regular at cavity eigenvalues, so only true
scattering poles make it singular.  The stacked boundary data is orthonormalized
before solving, which makes sigma_min of the matching matrix scale free.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .branchcut import SpectralPoint, deck_flip, lambda_of_s, same_threshold, tau_one
from .bundle import channels_for_degree, star_map, star_matrix
from .config import Numerics
from .cusp import CuspField
from .errors import BranchError, InvariantViolation, PoleProximity, ScenarioError


@dataclass
class Scenario:
    bundle: object
    model: object
    p: int
    k: int
    normal: bool = False
    numerics: Numerics = field(default_factory=Numerics)
    name: str = ""
    parent: Optional["Scenario"] = None
    relation: str = ""

    def __post_init__(self):
        chans = self.channels
        hits = [i for i, c in enumerate(chans) if c.s == self.k and c.nu == 0 and c.normal == self.normal]
        if len(hits) != 1:
            kind = "normal" if self.normal else "tangential"
            raise ScenarioError(f"no {kind} incoming block of fiber degree {self.k} at degree {self.p}")
        self._inc = hits[0]
        offs = np.cumsum([0] + [c.mult for c in chans])
        self._offsets = offs
        i0 = offs[self._inc]
        self.inc = slice(int(i0), int(i0 + chans[self._inc].mult))

    @property
    def channels(self):
        return self.model.channels

    @property
    def dim(self):
        return int(self._offsets[-1])

    @property
    def m(self):
        return self.inc.stop - self.inc.start

    @property
    def f(self):
        return self.bundle.f

    @property
    def a_k(self):
        return self.f / 2 - self.k

    @property
    def d(self):
        return abs(self.a_k)

    @property
    def thetas(self):
        return np.concatenate([np.full(c.mult, c.theta) for c in self.channels])

    @property
    def weights(self):
        return np.concatenate([np.full(c.mult, c.a) for c in self.channels])

    @property
    def threshold_set(self):
        return sorted({float(c.theta) for c in self.channels})

    @property
    def tau1(self):
        return tau_one(self.threshold_set)

    def channel_slice(self, i):
        return slice(int(self._offsets[i]), int(self._offsets[i + 1]))

    def point(self, s, flipped=frozenset()):
        return SpectralPoint(complex(s), self.k, float(self.d), frozenset(flipped))

    def point_from_lambda(self, lam):
        from .branchcut import point_from_lambda
        return point_from_lambda(lam, self.k, self.d)

    def blocks(self):
        """(block id, row slice) per channel: T[l=..,nu=..] tangential, S[...] normal."""
        out = []
        for i, c in enumerate(self.channels):
            tag = "S" if c.normal else "T"
            out.append((f"{tag}[l={c.s},nu={c.nu:g}]", self.channel_slice(i)))
        return out

    def branch_points(self):
        """s-values where some non-reference channel root branches."""
        pts = []
        for th in self.threshold_set:
            if same_threshold(th, self.d ** 2):
                continue
            root = np.sqrt(complex(self.d ** 2 - th))
            pts.extend([self.d + root, self.d - root])
        return pts


@dataclass
class ScatteringData:
    pt: SpectralPoint
    T: np.ndarray          # (dim, m): outgoing coefficients per incoming basis vector
    coeffs: np.ndarray     # (dim, m): cavity basis coefficients
    sigma_min: float
    cond: float
    block_slices: list

    def block(self, block_id):
        return self.T[dict(self.block_slices)[block_id]]

    @property
    def T_blocks(self):
        return {b: self.T[sl] for b, sl in self.block_slices if b.startswith("T")}

    @property
    def S_blocks(self):
        return {b: self.T[sl] for b, sl in self.block_slices if b.startswith("S")}


@dataclass
class Eigenform:
    pt: SpectralPoint
    phi: np.ndarray
    cusp: CuspField
    u_int: np.ndarray
    interior: np.ndarray   # (dim, len(u_int))

    def values(self, u_cusp):
        return self.cusp.values(u_cusp)


def outgoing_rates(scn, pt):
    return np.array([pt.outgoing_rate(th) for th in scn.thetas])


def solve_batch(scn, pts, allow_pole=False):
    """Scattering data for many points sharing one boundary-data evaluation."""
    pts = list(pts)
    lams = np.array([pt.lam for pt in pts])
    Y0, Y1 = scn.model.boundary_data(lams)
    n, m = scn.dim, scn.m
    o = np.array([outgoing_rates(scn, pt) for pt in pts]).reshape(len(pts), n)
    iota = np.array([pt.incoming_rate for pt in pts])
    Q, R = np.linalg.qr(np.concatenate([Y0, Y1], axis=1))
    Q0, Q1 = Q[:, :n], Q[:, n:]
    M = Q1 - o[:, :, None] * Q0
    sv = np.linalg.svd(M, compute_uv=False)
    sigma = sv[:, -1]
    with np.errstate(divide="ignore"):
        cond = np.where(sigma > 0, sv[:, 0] / sigma, np.inf)
    rhs = np.zeros((len(pts), n, m), dtype=complex)
    rhs[:, scn.inc, :] = (iota[:, None] - o[:, scn.inc])[:, :, None] * np.eye(m)[None]
    out = []
    for j, pt in enumerate(pts):
        if cond[j] > scn.numerics.cond_max:
            if not allow_pole:
                _, _, vh = np.linalg.svd(M[j])
                raise PoleProximity(f"matching matrix singular at s = {pt.s:.12g} (cond {cond[j]:.2e})",
                                    s=pt.s, direction=np.linalg.solve(R[j], vh[-1].conj()), sigma_min=sigma[j])
            out.append(ScatteringData(pt, np.full((n, m), np.nan + 0j), np.full((n, m), np.nan + 0j),
                                      float(sigma[j]), float(cond[j]), scn.blocks()))
            continue
        ct = np.linalg.solve(M[j], rhs[j])
        T = Q0[j] @ ct
        T[scn.inc] -= np.eye(m)
        coeffs = np.linalg.solve(R[j], ct)
        lam = pt.lam
        if pt.physical and abs(lam.imag) > 1e-12 and np.any(o[j].real >= 0):
            raise InvariantViolation("physical-sheet L2", f"non-decaying outgoing rate at s = {pt.s}")
        out.append(ScatteringData(pt, T, coeffs, float(sigma[j]), float(cond[j]), scn.blocks()))
    return out


def matching_sigma(scn, pts):
    """Normalized sigma_min and condition number of the matching matrix."""
    res = solve_batch(scn, pts, allow_pole=True)
    return np.array([r.sigma_min for r in res]), np.array([r.cond for r in res])


def scatter(scn, pt, allow_pole=False):
    return solve_batch(scn, [pt], allow_pole=allow_pole)[0]


def t_matrix(scn, s):
    """Reference block T^[k](s) on the physical sheet."""
    data = scatter(scn, scn.point(s))
    return data.T[scn.inc]


def eigenform(scn, pt, phi, data=None, with_interior=True):
    """E(s, phi): exact cusp field plus sampled cavity field."""
    data = data or scatter(scn, pt)
    phi = np.asarray(phi, dtype=complex).reshape(scn.m)
    if not np.any(phi):
        raise ValueError("incoming datum must be nonzero")
    o = outgoing_rates(scn, pt)
    terms = [(scn.inc.start + i, phi[i], pt.incoming_rate) for i in range(scn.m)]
    t = data.T @ phi
    terms += [(j, t[j], o[j]) for j in range(scn.dim)]
    cusp = CuspField.from_terms(scn.dim, terms)
    if with_interior and scn.model.has_interior:
        u, vals = scn.model.interior(pt.lam, data.coeffs @ phi)
    else:
        u, vals = np.zeros(0), np.zeros((scn.dim, 0), complex)
    return Eigenform(pt, phi, cusp, u, vals)


def assemble(scn, pt, phi):
    """(ScatteringData, Eigenform) at one spectral point."""
    data = scatter(scn, pt)
    return data, eigenform(scn, pt, phi, data)


def _second_difference(vals, h, order):
    if order == 2:
        return (vals[:, 2:] - 2 * vals[:, 1:-1] + vals[:, :-2]) / h**2, slice(1, -1)
    return (-vals[:, 4:] + 16 * vals[:, 3:-1] - 30 * vals[:, 2:-2] + 16 * vals[:, 1:-3] - vals[:, :-4]) / (12 * h**2), slice(2, -2)


def eigenform_residual(scn, E, stride=1, order=2):
    """Max residual of (-d^2 + Theta + V - lambda) E.

    Returns (cusp, interior): the cusp part is evaluated exactly per exponential
    term, the cavity part by central differences on the sampled field (order 2
    or 4 stencil) using every ``stride``-th sample.
    """
    lam = E.pt.lam
    th = scn.thetas[E.cusp.coord]
    cusp = float(np.max(np.abs(E.cusp.coef * (th - lam - E.cusp.rate**2)), initial=0.0))
    if E.u_int.size == 0:
        return cusp, 0.0
    u = E.u_int[::stride]
    vals = E.interior[:, ::stride]
    h = u[1] - u[0]
    dd, core = _second_difference(vals, h, order)
    Q = scn.model.V.values(u[core]) + np.diag(scn.thetas)[None] - lam * np.eye(scn.dim)[None]
    resid = -dd + np.einsum("kab,bk->ak", Q, vals[:, core])
    return cusp, float(np.max(np.abs(resid)))


def selfadjoint_check(scn, s, phi, psi):
    """|<T(conj s) phi, psi> - <phi, T(s) psi>| on the reference block."""
    phi = np.asarray(phi, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    Tb = t_matrix(scn, np.conj(s))
    Ts = t_matrix(scn, s)
    return float(abs(np.vdot(psi, Tb @ phi) - np.vdot(Ts @ psi, phi)))


def deck_guard(scn):
    """Every channel at the reference threshold must be the incoming channel."""
    bad = [c.label for i, c in enumerate(scn.channels)
           if i != scn._inc and same_threshold(c.theta, scn.d ** 2)]
    if bad:
        raise BranchError(f"channels {bad} share the reference threshold; the deck relation needs them in the incoming block")


def _field_grid(scn, E, u_cusp):
    cusp = E.values(u_cusp)
    return np.concatenate([E.interior, cusp], axis=1)


def deck_equation_check(scn, pt, phi, u_max=6.0, n_u=61):
    """max |E(s, phi) - E(2d - s, T^[k](s) phi)| / max(1, max|E|) on a test grid."""
    deck_guard(scn)
    if abs(pt.s - scn.d) < 1e-8:
        raise BranchError("s = d_k is the fixed point of the deck transform")
    flipped = deck_flip(pt, scn.tau1)
    d1, E1 = assemble(scn, pt, phi)
    E2 = eigenform(scn, flipped, d1.T[scn.inc] @ np.asarray(phi, dtype=complex))
    u = np.linspace(0.0, u_max, n_u)
    g1, g2 = _field_grid(scn, E1, u), _field_grid(scn, E2, u)
    return float(np.max(np.abs(g1 - g2)) / max(1.0, np.max(np.abs(g1))))


def contour_points(scn, pt0, rho, M, loops=1):
    """Points on |s - s0| = rho with roots continued from pt0 step by step."""
    th = scn.threshold_set
    first = pt0.continue_to(pt0.s + rho, th)
    pts = [first]
    for j in range(1, loops * M):
        pts.append(pts[-1].continue_to(pt0.s + rho * np.exp(2j * np.pi * j / M), th))
    return pts


def closes_on_sheet(scn, pts, rho, M):
    """True when continuing once around the loop returns to the starting sheet."""
    back = pts[M - 1].continue_to(pts[0].s, scn.threshold_set)
    return back.flipped == pts[0].flipped


def default_deriv_rho(scn, s0):
    dist = [abs(s0 - b) for b in scn.branch_points()]
    rho = scn.numerics.deriv_rho
    if dist:
        rho = min(rho, 0.4 * min(dist))
    return rho


def t_derivative(scn, s, order=1, rho=None, M=None, pt=None, pole_tol=1e-8):
    """Cauchy-integral s-derivative of the full T, converted to d/dlambda for order 1.

    order 0 returns the contour mean (the regularized value), using the
    double loop at a branch point.  The residue of
    T over the same contour is a pole probe: above ``pole_tol`` the circle
    encloses a pole and PoleProximity is raised.
    """
    pt0 = pt or scn.point(s)
    rho = rho or default_deriv_rho(scn, pt0.s)
    M = M or scn.numerics.contour_M
    pts = contour_points(scn, pt0, rho, M)
    loops = 1
    if not closes_on_sheet(scn, pts, rho, M):
        if order != 0:
            raise BranchError(f"s = {pt0.s:.6g} is a branch point; only the regularized value is available")
        loops = 2
        pts = contour_points(scn, pt0, rho, M, loops=2)
    Ts = np.array([d.T for d in solve_batch(scn, pts)])
    ph = np.exp(2j * np.pi * np.arange(loops * M) / M)
    res = rho * np.tensordot(ph, Ts, axes=1) / (loops * M)
    scale = max(1.0, float(np.max(np.abs(Ts))))
    if np.max(np.abs(res)) > pole_tol * scale * rho:
        raise PoleProximity(f"pole inside derivative contour around s = {pt0.s:.6g}", s=pt0.s)
    if order == 0:
        # on a double loop this is the mean over a circle in sqrt(s - s0)
        return np.mean(Ts, axis=0)
    if order != 1:
        raise ValueError("only order 0 and 1 are supported")
    dTds = np.tensordot(ph.conj(), Ts, axes=1) / (M * rho)
    dlds = 2 * scn.d - 2 * pt0.s
    return dTds / dlds


def normal_block_from_tangential(scn, T_full, pt):
    """Coefficients of E(s, du ^ phi): (a_c + o_c) / (a_k - d_k + s) times T per channel."""
    den = scn.a_k - scn.d + pt.s
    if abs(den) < 1e-14:
        raise ZeroDivisionError("a_k - d_k + s vanishes")
    fac = (scn.weights + outgoing_rates(scn, pt)) / den
    return fac[:, None] * T_full


# --- partner scenarios -------------------------------------------------------------------

@dataclass
class TransformedModel:
    """Boundary data of (A + d/du) applied to the eigenforms of ``base``.

    Z(0) = S (A Y(0) + Y'(0)),  Z'(0) = S (A Y'(0) + (Theta - lambda) Y(0)),
    with A the channel weights and S a signed permutation into the new
    channel coordinates.  The transformed fields are again cusp solutions,
    so the model is specified by its boundary data alone.
    """

    base: object
    channels: list
    A: np.ndarray
    S: np.ndarray
    base_thetas: np.ndarray

    @property
    def dim(self):
        return sum(c.mult for c in self.channels)

    @property
    def has_interior(self):
        return False

    @property
    def hermitian(self):
        return bool(getattr(self.base, "hermitian", False) and all(c.nu == 0 for c in self.channels))

    @property
    def degree_free(self):
        return False

    def boundary_data(self, lams):
        lams = np.atleast_1d(np.asarray(lams, dtype=complex))
        Y0, Y1 = self.base.boundary_data(lams)
        A = self.A[None, :, None]
        shift = self.base_thetas[None, :, None] - lams[:, None, None]
        Z0 = A * Y0 + Y1
        Z1 = A * Y1 + shift * Y0
        return self.S @ Z0, self.S @ Z1

    def interior(self, lam, coeffs):
        return np.zeros(0), np.zeros((self.dim, 0), complex)


def _sort_key(c):
    return (c.normal, c.s, c.r, c.nu)


def dualize(scn):
    """Star partner: incoming *phi at degree n - p, channels mapped by the Hodge star.

    Its eigenforms are * (A + d/du) E(s, phi) / (a_k - d_k + s), so the
    star-switch relation between the two scenarios holds by construction.
    """
    b = scn.bundle
    if not b.is_dual_symmetric():
        raise ScenarioError("bundle violates the duality dimension constraint h[r][s] = h[b-r][f-s]")
    images = sorted((star_map(b, c)[0] for c in scn.channels), key=_sort_key)
    S = star_matrix(b, scn.channels, images)
    model = TransformedModel(scn.model, images, scn.weights, S, scn.thetas)
    return Scenario(b, model, b.n - scn.p, b.f - scn.k, scn.normal, scn.numerics,
                    name=f"dual({scn.name})", parent=scn, relation="star")


def derivative_partner(scn):
    """d-partner at degree p + 1: tangential channels become du ^ channels.

    The incoming block is du ^ phi; its scattering coefficients are those of
    E(s, du ^ phi) = d E(s, phi) / (a_k - d_k + s).
    """
    if any(c.normal for c in scn.channels):
        raise ScenarioError("the d-partner needs a parent with tangential channels only; "
                            "normal channels of the parent would not map to du ^ channels")
    chans = [replace(c, normal=True) for c in scn.channels]
    keys = [(c.r, c.s, c.nu, c.normal) for c in chans]
    if len(set(keys)) != len(keys):
        raise ScenarioError("derivative partner would merge channels")
    order = sorted(range(len(chans)), key=lambda i: _sort_key(chans[i]))
    new = [chans[i] for i in order]
    P = np.zeros((scn.dim, scn.dim))
    offs = np.cumsum([0] + [c.mult for c in new])
    for pos, i in enumerate(order):
        src = scn.channel_slice(i)
        m = chans[i].mult
        P[offs[pos]:offs[pos] + m, src] = np.eye(m)
    model = TransformedModel(scn.model, new, scn.weights, P, scn.thetas)
    return Scenario(scn.bundle, model, scn.p + 1, scn.k, True, scn.numerics,
                    name=f"d({scn.name})", parent=scn, relation="d")


def partner_defect(scn, s, relation):
    """Max defect of the partner relation at s (relative to the partner's scale).

    relation 'star': (a_k - d_k + s) T*(s) S_inc = S diag(a + o) T(s)
    relation 'd'   : T_d(s) = P diag((a + o) / (a_k - d_k + s)) T(s)
    """
    parent = scn.parent
    if parent is None or scn.relation != relation:
        return None
    pt_p = parent.point(s)
    pt_c = scn.point(s)
    Tp = scatter(parent, pt_p).T
    Tc = scatter(scn, pt_c).T
    S = scn.model.S
    Sinc = S[scn.inc][:, parent.inc]
    if relation == "d":
        rhs = S @ normal_block_from_tangential(parent, Tp, pt_p)
        lhs = Tc @ Sinc
    else:
        fac = parent.weights + outgoing_rates(parent, pt_p)
        rhs = S @ (fac[:, None] * Tp)
        lhs = (parent.a_k - parent.d + pt_p.s) * (Tc @ Sinc)
    return float(np.max(np.abs(lhs - rhs)) / max(1.0, float(np.max(np.abs(rhs)))))


def middle_unitarity_defect(scn, tau):
    """|T T* - I| for the middle block over real tau in (0, tau_1); a diagnostic, never asserted."""
    if 2 * scn.k != scn.bundle.f:
        raise ScenarioError("the unitarity diagnostic applies to the middle fiber degree only")
    if not 0 < tau < scn.tau1:
        raise ScenarioError(f"tau must lie in (0, tau_1 = {scn.tau1:g}), got {tau}")
    T = scatter(scn, scn.point(-1j * np.sqrt(tau))).T[scn.inc]
    return float(np.linalg.norm(T @ T.conj().T - np.eye(scn.m), 2))


def star_duality_check(scn, s):
    """Star-switch defect for a scenario produced by ``dualize``; None otherwise."""
    return partner_defect(scn, s, "star")


def fftmat_check(scn, s):
    """Normal-block defect for a scenario produced by ``derivative_partner``; None otherwise."""
    return partner_defect(scn, s, "d")
