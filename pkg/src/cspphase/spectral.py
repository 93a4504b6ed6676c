"""Pair matrices, the two-replica operator, and the Kesten-Stigum bound.

For a weight table psi and positions h != h' the q x q matrix

    Phi_{psi,h,h'}(w,w') = q^{1-k} xi^{-1} sum_{tau: tau_h=w, tau_h'=w'} psi(tau)

averages to the doubly-stochastic channel Phi = E[Phi_Psi] (positions 1,2).
Xi = E[Phi_Psi (x) Phi_Psi] acts on R^q (x) R^q; restricted to the subspace
E of tensors orthogonal to both 1 (x) y and y (x) 1, its largest Rayleigh
quotient r gives d_KS = 1 / ((k-1) r), infinite when r <= 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import ModelError


class SpectralError(ValueError):
    """Refused spectral computation (e.g. the row-sum identity fails)."""


def phi_matrix(table, h, hp, xi):
    """Position-pair channel matrix for one table; h, hp are 1-based."""
    if h == hp:
        raise ModelError("positions h and h' must differ")
    if not (1 <= h <= table.k and 1 <= hp <= table.k):
        raise ModelError("positions must lie in [1,k]")
    return _phi_matrix_ordered(table, h, hp, xi)


def _phi_matrix_ordered(table, h, hp, xi):
    q, k = table.q, table.k
    arr = table.as_array()
    keep = (h - 1, hp - 1)
    axes = tuple(i for i in range(k) if i not in keep)
    mat = arr.sum(axis=axes) if axes else arr
    # remaining axes keep increasing original order: transpose when h > hp so
    # axis 0 is position h and axis 1 is position h'.
    if h > hp:
        mat = mat.T
    return q ** (1 - k) / xi * np.asarray(mat, dtype=float)


def basis_orthogonal_to_ones(q):
    """Orthonormal basis of the hyperplane 1-perp in R^q (Gram-Schmidt on
    coordinate differences e_0 - e_i)."""
    vecs = []
    for i in range(1, q):
        v = np.zeros(q)
        v[0], v[i] = 1.0, -1.0
        for u in vecs:
            v -= (v @ u) * u
        v /= np.linalg.norm(v)
        vecs.append(v)
    return np.array(vecs).T  # (q, q-1), columns orthonormal


def basis_E(q):
    """Orthonormal basis (columns) of E = {z : <z, 1(x)y> = <z, y(x)1> = 0}."""
    u = basis_orthogonal_to_ones(q)
    cols = []
    for i in range(q - 1):
        for j in range(q - 1):
            cols.append(np.kron(u[:, i], u[:, j]))
    return np.array(cols).T  # (q^2, (q-1)^2)


def basis_E_prime(q):
    """Orthonormal basis of E' = (1 (x) 1)-perp in R^{q^2}."""
    return basis_orthogonal_to_ones(q * q)


def merge_eigenvalues(values, tol=1e-8):
    """Sorted eigenvalues with clusters within tol averaged (multiplicity
    preserved): returns a plain sorted array, plus (value, multiplicity)
    pairs."""
    vals = np.sort(np.asarray(values, dtype=float))
    merged = []
    cluster = [vals[0]]
    for v in vals[1:]:
        if v - cluster[-1] <= tol:
            cluster.append(v)
        else:
            merged.append((float(np.mean(cluster)), len(cluster)))
            cluster = [v]
    merged.append((float(np.mean(cluster)), len(cluster)))
    flat = np.array([v for v, mult in merged for _ in range(mult)])
    return flat, merged


@dataclass
class SpectralReport:
    q: int
    k: int
    phi_psi: dict          # (h, hp) -> (n_weights, q, q) array
    phi: np.ndarray        # (q, q)
    xi_op: np.ndarray      # (q^2, q^2)
    eig_phi: np.ndarray
    eig_phi_mult: list
    eig_xi_E: np.ndarray
    eig_xi_E_mult: list
    eig_xi_Eprime: np.ndarray
    eig_xi_Eprime_mult: list
    d_ks: float
    rayleigh_max: float

    def eig_phi_nontrivial(self):
        """Eig(Phi) with the Perron eigenvalue 1 removed once."""
        vals = list(self.eig_phi)
        idx = int(np.argmin([abs(v - 1.0) for v in vals]))
        return np.array(vals[:idx] + vals[idx + 1:])

    def to_dict(self):
        return {
            "q": self.q,
            "k": self.k,
            "phi": self.phi.tolist(),
            "eig_phi": self.eig_phi.tolist(),
            "eig_xi_E": self.eig_xi_E.tolist(),
            "eig_xi_Eprime": self.eig_xi_Eprime.tolist(),
            "d_ks": None if math.isinf(self.d_ks) else self.d_ks,
            "rayleigh_max": self.rayleigh_max,
        }


def _check_row_sums(model, tol=1e-9):
    target = model.q ** (model.k - 1) * model.xi
    worst = 0.0
    for i in range(model.n_weights):
        t = model.table(i)
        for pos in range(model.k):
            arr = t.as_array()
            sums = arr.sum(axis=tuple(a for a in range(model.k) if a != pos))
            worst = max(worst, float(np.max(np.abs(sums - target))))
        if worst > tol:
            return worst
    return worst


def build_report(model, sym_tol=1e-9, merge_tol=1e-8):
    """Channel matrices, spectra on E and E', and the Kesten-Stigum bound.

    Refuses models violating the row-sum identity: the operators are only
    stochastic (and the bound meaningful) under it.
    """
    q, k = model.q, model.k
    if q > 16:
        raise SpectralError("dense spectral builder supports q <= 16")
    worst = _check_row_sums(model, sym_tol)
    if worst > sym_tol:
        raise SpectralError(
            f"row-sum identity violated (residual {worst:.3g}); "
            "spectral report refused")

    nw = model.n_weights
    probs = np.array([model.weight_prob(i) for i in range(nw)])
    phi_psi = {}
    for h in range(1, k + 1):
        for hp in range(1, k + 1):
            if h == hp:
                continue
            mats = np.array([
                _phi_matrix_ordered(model.table(i), h, hp, model.xi)
                for i in range(nw)])
            phi_psi[(h, hp)] = mats

    base = phi_psi[(1, 2)]
    phi = np.tensordot(probs, base, axes=1)
    xi_op = np.zeros((q * q, q * q))
    for i in range(nw):
        xi_op += probs[i] * np.kron(base[i], base[i])

    eig_phi_raw = np.linalg.eigvalsh(0.5 * (phi + phi.T))
    eig_phi, eig_phi_mult = merge_eigenvalues(eig_phi_raw, merge_tol)

    be = basis_E(q)
    restricted = be.T @ xi_op @ be
    sym_resid = float(np.max(np.abs(restricted - restricted.T)))
    eig_E_raw = np.linalg.eigvalsh(0.5 * (restricted + restricted.T))
    eig_E, eig_E_mult = merge_eigenvalues(eig_E_raw, merge_tol)

    bp = basis_E_prime(q)
    restp = bp.T @ xi_op @ bp
    eig_Ep_raw = np.linalg.eigvalsh(0.5 * (restp + restp.T))
    eig_Ep, eig_Ep_mult = merge_eigenvalues(eig_Ep_raw, merge_tol)

    rmax = float(eig_E_raw.max())
    if rmax <= 0.0:
        d_ks = math.inf
    else:
        d_ks = 1.0 / ((k - 1) * rmax)

    return SpectralReport(q, k, phi_psi, phi, xi_op,
                          eig_phi, eig_phi_mult,
                          eig_E, eig_E_mult,
                          eig_Ep, eig_Ep_mult,
                          d_ks, rmax)


def rayleigh_max_bruteforce(xi_op, q, n_grid=20000, iters=200, rng=None):
    """Independent check of max <Xi x, x> over unit x in E: random unit
    vectors plus projected power iteration on the shifted operator."""
    if rng is None:
        rng = np.random.default_rng(0)
    be = basis_E(q)
    dim = be.shape[1]
    xs = rng.normal(size=(n_grid, dim))
    xs /= np.linalg.norm(xs, axis=1, keepdims=True)
    restricted = be.T @ xi_op @ be
    sym = 0.5 * (restricted + restricted.T)
    best = float(np.max(np.einsum("ni,ij,nj->n", xs, sym, xs)))
    # power iteration on sym + shift to locate the top of the spectrum
    shift = float(np.abs(sym).sum())
    v = rng.normal(size=dim)
    v /= np.linalg.norm(v)
    for _ in range(iters):
        v = (sym + shift * np.eye(dim)) @ v
        v /= np.linalg.norm(v)
    best = max(best, float(v @ sym @ v))
    return best


def ks_consistency(report, dcond_upper, tol=1e-9):
    """True iff a condensation-threshold estimate respects the spectral
    bound: upper endpoint <= d_KS + tol."""
    upper = dcond_upper[1] if isinstance(dcond_upper, (tuple, list)) else dcond_upper
    if math.isinf(report.d_ks):
        return True
    return upper <= report.d_ks + tol
