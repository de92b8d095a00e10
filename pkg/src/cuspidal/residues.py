"""Poles of the scattering blocks in (d_k, 2 d_k] and their residues.

Poles are located from the smallest singular value of the (normalized)
matching matrix along the real s-axis, refined by a bounded scalar
minimization and then by a quadratic fit of sigma_min^2.  Residues come from trapezoid quadrature on a circle.  When the
circle winds around a branch point (the middle threshold at s = 2 d_k), the
continuation does not close after one turn; the contour is then traversed
twice, which closes on the double cover, and the integral is halved.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import minimize_scalar

from .branchcut import same_threshold
from .cusp import CuspField
from .errors import ConvergenceError, InvariantViolation
from .scatter import closes_on_sheet, contour_points, outgoing_rates, solve_batch


@dataclass
class ScanResult:
    poles: list
    sigma_at_poles: list
    unresolved: list = field(default_factory=list)   # (bracket_lo, bracket_hi, sigma)
    removable: list = field(default_factory=list)    # singular matching, zero residue
    threshold_adjacent: list = field(default_factory=list)   # minima at the d_k end of the window
    grid: np.ndarray = None
    sigma: np.ndarray = None


def _sigma_real(scn, s):
    pts = [scn.point(x) for x in np.atleast_1d(s)]
    return np.array([r.sigma_min for r in solve_batch(scn, pts, allow_pole=True)])


def _parabola_refine(f, x, lo, hi):
    """Vertex of sigma_min^2, which is smooth (quadratic) at a simple zero."""
    for delta in (1e-5, 1e-7):
        a, b = max(lo, x - delta), min(hi, x + delta)
        if b - a < delta:
            break
        xs = np.array([a, 0.5 * (a + b), b])
        ys = np.array([f(v) for v in xs]) ** 2
        c2, c1, _ = np.polyfit(xs - xs[1], ys, 2)
        if c2 <= 0:
            break
        x = float(np.clip(xs[1] - c1 / (2 * c2), lo, hi))
    return x, f(x)


def pole_scan(scn, n=None, margin=None, accept=1e-7, grid=None, sigma=None):
    """Real poles of T(., phi) in (d_k, 2 d_k].

    ``grid``/``sigma`` may carry a precomputed scan (e.g. from a cached sweep).
    A local minimum of sigma_min is refined; it is a pole when the refined
    sigma_min is below ``accept``, otherwise it is reported as unresolved.
    """
    d = scn.d
    if d == 0:
        return ScanResult([], [], grid=np.zeros(0), sigma=np.zeros(0))
    n = n or scn.numerics.scan_points
    margin = margin if margin is not None else 1e-3 * d
    if grid is None:
        grid = np.linspace(d + margin, 2 * d, n)
        sigma = _sigma_real(scn, grid)
    h = grid[1] - grid[0]
    poles, sig, unresolved, removable, adjacent = [], [], [], [], []
    for i in range(len(grid)):
        left = sigma[i - 1] if i > 0 else np.inf
        right = sigma[i + 1] if i + 1 < len(grid) else np.inf
        if not (sigma[i] <= left and sigma[i] <= right and sigma[i] < 0.5):
            continue
        if i == 0 and sigma[0] < 1e-3:
            adjacent.append((float(grid[0]), float(sigma[0])))
            continue
        lo = max(grid[0], grid[i] - h)
        hi = min(2 * d, grid[i] + h)
        f = lambda x: float(_sigma_real(scn, x)[0])
        opt = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-14 * max(1.0, d), "maxiter": 500})
        x, val = float(opt.x), float(opt.fun)
        if val > accept and hi == 2 * d and f(2 * d) < val:
            x, val = 2 * d, f(2 * d)
        elif val <= accept:
            x, val = _parabola_refine(f, x, lo, hi)
        if val <= accept:
            if any(abs(x - p) < 10 * h for p in poles + removable):
                continue
            if _has_residue(scn, x):
                poles.append(x)
                sig.append(val)
            else:
                removable.append(x)
        elif val < 1e-3:
            unresolved.append((lo, hi, val))
    return ScanResult(poles, sig, unresolved, removable, adjacent, grid, sigma)


def _has_residue(scn, x, tol=1e-8):
    """A singular matching matrix is a pole only if T itself has a residue there.

    At s = 2 d_k a middle channel with zero rate can make the matching
    singular while T stays regular (a threshold degeneracy).
    """
    rd = contour_residue(scn, x, check=False)
    scale = max(1.0, float(np.max(np.abs(rd.C_full))))
    return float(np.max(np.abs(rd.C_full))) > tol * scale


def rectangle_sweep(scn, re_max=None, im_min=1e-2, im_max=0.3, nx=40, ny=12):
    """Minimum normalized sigma_min over {d_k <= Re s <= re_max, im_min <= |Im s| <= im_max}."""
    d = scn.d
    re_max = re_max if re_max is not None else 2 * d + 0.2
    xs = np.linspace(d, re_max, nx)
    ys = np.linspace(im_min, im_max, ny)
    pts = [scn.point(x + sgn * 1j * y) for x in xs for y in ys for sgn in (1, -1)]
    res = solve_batch(scn, pts, allow_pole=True)
    sig = np.array([r.sigma_min for r in res])
    j = int(np.argmin(sig))
    return float(sig[j]), pts[j].s


@dataclass
class ResidueData:
    s0: float
    rho: float
    M: int
    loops: int
    C_full: np.ndarray        # residue of all outgoing coefficients, (dim, m)
    coeffs: np.ndarray        # residue of the cavity coefficients, (dim, m)
    order_certificate: float
    open_channel_leak: float
    convergence: float
    blocks: list

    @property
    def C(self):
        """Residue of the reference block, the operator C~^[k]."""
        return self._C

    def block(self, block_id):
        return self.C_full[dict(self.blocks)[block_id]]


def default_rho(scn, s0, others=()):
    cands = [0.05 * scn.d if scn.d > 0 else 0.05, 0.5 * abs(s0 - scn.d)]
    cands += [0.5 * abs(s0 - o) for o in others if abs(s0 - o) > 1e-12]
    cands += [0.5 * abs(s0 - b) for b in scn.branch_points() if abs(s0 - b) > 1e-9]
    return min(c for c in cands if c > 0)


def contour_residue(scn, s0, rho=None, M=None, others=(), conv_tol=1e-9, check=True):
    """Trapezoid residues of T and of the cavity coefficients at s0."""
    M = M or scn.numerics.contour_M
    rho = rho or scn.numerics.contour_rho or default_rho(scn, s0, others)
    pt0 = scn.point(s0)
    pts = contour_points(scn, pt0, rho, M, loops=1)
    loops = 1
    if not closes_on_sheet(scn, pts, rho, M):
        loops = 2
        pts = contour_points(scn, pt0, rho, M, loops=2)
    data = solve_batch(scn, pts)
    Ts = np.array([d.T for d in data])
    Cs = np.array([d.coeffs for d in data])
    ph = np.exp(2j * np.pi * np.arange(loops * M) / M)
    w1 = rho * ph / (loops * M)
    C_full = np.tensordot(w1, Ts, axes=1)
    coeffs = np.tensordot(w1, Cs, axes=1)
    half = np.tensordot(2 * w1[::2], Ts[::2], axes=1)
    conv = float(np.max(np.abs(C_full - half)))
    scale = max(1.0, float(np.max(np.abs(C_full))))
    if check and conv > conv_tol * scale:
        raise ConvergenceError(f"residue at s0 = {s0:.10g} changed by {conv:.2e} between M/2 and M points")
    a2 = np.tensordot(rho * w1 * ph, Ts, axes=1)
    cert = float(np.max(np.abs(a2)) / rho) if a2.size else 0.0
    lam0 = complex(pt0.lam)
    th = scn.thetas
    open_rows = np.array([th_j <= lam0.real + 1e-12 or same_threshold(th_j, lam0.real) for th_j in th])
    open_rows[scn.inc] = False
    leak = float(np.max(np.abs(C_full[open_rows]), initial=0.0))
    rd = ResidueData(float(np.real(s0)), float(rho), int(M), loops, C_full, coeffs, cert, leak, conv, scn.blocks())
    rd._C = C_full[scn.inc]
    return rd


def residue_field(scn, rd, phi):
    """E~(phi): cusp exponentials at s0 with residue coefficients, plus cavity field."""
    phi = np.asarray(phi, dtype=complex)
    pt0 = scn.point(rd.s0)
    o = outgoing_rates(scn, pt0)
    t = rd.C_full @ phi
    cusp = CuspField.from_terms(scn.dim, [(j, t[j], o[j]) for j in range(scn.dim)])
    if scn.model.has_interior:
        u, vals = scn.model.interior(pt0.lam, rd.coeffs @ phi)
    else:
        u, vals = np.zeros(0), np.zeros((scn.dim, 0), complex)
    return cusp, u, vals


def cusp_inner_tail(F, G, start=0.0):
    """Closed-form int_start^inf <F(u), G(u)> du for decaying exponential sums."""
    same = F.coord[:, None] == G.coord[None, :]
    sig = F.rate[:, None] + np.conj(G.rate)[None, :]
    cc = F.coef[:, None] * np.conj(G.coef)[None, :]
    live = same & (cc != 0)
    if np.any(sig.real[live] >= 0):
        raise InvariantViolation("residue is L2", "divergent cusp tail in the residue field")
    return complex(-np.sum(cc[live] * np.exp(sig[live] * start) / sig[live]))


def field_inner(scn, A, B):
    """<A, B> for (cusp, u, interior) triples: cavity by Simpson, cusp in closed form."""
    cA, uA, vA = A
    cB, _, vB = B
    val = cusp_inner_tail(cA, cB)
    if uA.size:
        val += complex(simpson(np.sum(vA * np.conj(vB), axis=0), x=uA))
    return val


def residue_pairing_check(scn, rd, phi, psi):
    """|<E~(phi), E~(psi)> - <phi, C~ psi>|."""
    Ep = residue_field(scn, rd, phi)
    Eq = residue_field(scn, rd, psi)
    lhs = field_inner(scn, Ep, Eq)
    rhs = np.vdot(rd.C @ np.asarray(psi, dtype=complex), np.asarray(phi, dtype=complex))
    return float(abs(lhs - rhs))


def psd_split(C, rank_tol=1e-8, herm_tol=1e-6, zero_tol=1e-10):
    """Orthonormal bases of ker C and im C for a Hermitian PSD matrix.

    Eigenvalues up to rank_tol * |C| belong to the kernel; a matrix with
    |C| <= zero_tol is treated as C = 0 (contour noise of a regular point).
    """
    C = np.atleast_2d(np.asarray(C, dtype=complex))
    n = C.shape[0]
    nrm = float(np.linalg.norm(C, 2)) if C.size else 0.0
    if nrm <= zero_tol:
        return np.eye(n, dtype=complex), np.zeros((n, 0), complex)
    herm = float(np.linalg.norm(C - C.conj().T, 2))
    if herm > herm_tol * nrm:
        raise InvariantViolation("residue Hermitian", f"|C - C*| = {herm:.2e}")
    w, v = np.linalg.eigh((C + C.conj().T) / 2)
    thr = rank_tol * nrm
    if w.min() < -10 * thr:
        raise InvariantViolation("residue PSD", f"eigenvalue {w.min():.3e} below -10 rank_tol")
    return v[:, w <= thr], v[:, w > thr]


def residue_invariants(rd):
    """Hermitian defect (relative), min eigenvalue, order certificate, leak."""
    C = rd.C
    nrm = float(np.linalg.norm(C, 2))
    herm = float(np.linalg.norm(C - C.conj().T, 2))
    eig = float(np.linalg.eigvalsh((C + C.conj().T) / 2).min())
    return {"norm": nrm, "hermitian_defect": herm, "min_eig": eig,
            "order_certificate": rd.order_certificate, "leak": rd.open_channel_leak}
