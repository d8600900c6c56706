"""Operator assembly for the periodic Taylor-Hood pair.

Every cube carries the same six element geometries, so local matrices are
computed once per template and scattered with translated DOF maps.  The
convection operator uses the skew-symmetrised (Temam) form

    c(w; u, phi) = ((w . grad) u, phi) + 1/2 ((div w) u, phi),

whose diagonal c(w; u, u) is a pointwise divergence integrated over the
periodic box, hence zero to quadrature exactness for any w in the space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .space import TaylorHoodSpace


@dataclass
class StaticOperators:
    """Assembled mass M, stiffness A, divergence B and pressure helpers."""

    M: sps.csr_matrix        # (Nv, Nv) velocity mass
    A: sps.csr_matrix        # (Nv, Nv) velocity stiffness (gradient form)
    B: sps.csr_matrix        # (Np, Nv) divergence coupling int div(u) pi
    Mp: sps.csr_matrix       # (Np, Np) pressure mass
    c_pressure: np.ndarray   # (Np,) integrals of the pressure basis
    scatter: tuple           # cached (rows, cols) for convection reuse


def _scalar_scatter(space: TaylorHoodSpace):
    """COO index arrays for component-blocked scalar 10x10 element blocks."""
    rows_all, cols_all = [], []
    ns = space.n_scalar
    for t in range(6):
        g = space.gmap[t]                       # (ncube, 10)
        r = np.repeat(g, 10, axis=1).ravel()    # (ncube*100,)
        c = np.tile(g, (1, 10)).ravel()
        rows_all.append(r)
        cols_all.append(c)
    rows = np.concatenate(rows_all)
    cols = np.concatenate(cols_all)
    rows3 = np.concatenate([rows + k * ns for k in range(3)])
    cols3 = np.concatenate([cols + k * ns for k in range(3)])
    return rows, cols, rows3, cols3


def assemble_static(space: TaylorHoodSpace) -> StaticOperators:
    wq, phi = space.wq, space.phi
    ncube = space.gmap.shape[1]
    ns, np_ = space.n_scalar, space.n_pressure
    nv = 3 * ns

    rows, cols, rows3, cols3 = _scalar_scatter(space)

    mass_loc = np.einsum("q,qv,qw->vw", wq, phi, phi)
    mass_vals = np.concatenate([np.tile(mass_loc.ravel(), ncube)] * 6)

    stiff_vals = []
    b_rows, b_cols, b_vals = [], [], []
    for t in range(6):
        g = space.grad[t]                       # (nq, 10, 3)
        a_loc = np.einsum("q,qvd,qwd->vw", wq, g, g)
        stiff_vals.append(np.tile(a_loc.ravel(), ncube))
        # B[p, (c, v)] = int d_c phi_v * lambda_p
        b_loc = np.einsum("q,qp,qvc->pcv", wq, space.pphi, g)  # (4, 3, 10)
        pm = space.pmap[t]                      # (ncube, 4)
        gm = space.gmap[t]                      # (ncube, 10)
        for c in range(3):
            r = np.repeat(pm, 10, axis=1).ravel()
            cc = np.tile(gm, (1, 4)).reshape(ncube, 4, 10)
            b_rows.append(r)
            b_cols.append((cc + c * ns).ravel())
            b_vals.append(np.tile(b_loc[:, c, :].ravel(), ncube))
    stiff_vals = np.concatenate(stiff_vals)

    scalar_m = sps.coo_matrix((np.tile(mass_loc.ravel(), 6 * ncube),
                               (rows, cols)), shape=(ns, ns)).tocsr()
    scalar_a = sps.coo_matrix((stiff_vals, (rows, cols)), shape=(ns, ns)).tocsr()
    M = sps.block_diag([scalar_m] * 3, format="csr")
    A = sps.block_diag([scalar_a] * 3, format="csr")

    B = sps.coo_matrix((np.concatenate(b_vals),
                        (np.concatenate(b_rows), np.concatenate(b_cols))),
                       shape=(np_, nv)).tocsr()

    mp_loc = np.einsum("q,qp,qr->pr", wq, space.pphi, space.pphi)
    mp_rows = np.concatenate([np.repeat(space.pmap[t], 4, axis=1).ravel()
                              for t in range(6)])
    mp_cols = np.concatenate([np.tile(space.pmap[t], (1, 4)).ravel()
                              for t in range(6)])
    Mp = sps.coo_matrix((np.tile(mp_loc.ravel(), 6 * ncube),
                         (mp_rows, mp_cols)), shape=(np_, np_)).tocsr()

    c_loc = np.einsum("q,qp->p", wq, space.pphi)
    c_pressure = np.zeros(np_)
    for t in range(6):
        np.add.at(c_pressure, space.pmap[t].ravel(),
                  np.tile(c_loc, ncube))

    return StaticOperators(M=M, A=A, B=B, Mp=Mp, c_pressure=c_pressure,
                           scatter=(rows3, cols3))


def assemble_convection(space: TaylorHoodSpace, ops: StaticOperators,
                        w: np.ndarray) -> sps.csr_matrix:
    """Skew-symmetrised convection operator C(w), shape (Nv, Nv)."""
    wq, phi = space.wq, space.phi
    ncube = space.gmap.shape[1]
    comp = np.asarray(w).reshape(3, space.n_scalar)
    vals = []
    for t in range(6):
        g = space.grad[t]
        w_loc = comp[:, space.gmap[t]]                       # (3, ncube, 10)
        w_at_q = np.einsum("cev,qv->ceq", w_loc, phi)        # (3, ncube, nq)
        div_w = np.einsum("cev,qvc->eq", w_loc, g)           # (ncube, nq)
        adv = np.einsum("ceq,qwc->eqw", w_at_q, g)           # (ncube, nq, 10)
        c_loc = np.einsum("q,qv,eqw->evw", wq, phi, adv)
        c_loc += 0.5 * np.einsum("q,eq,qv,qw->evw", wq, div_w, phi, phi)
        vals.append(c_loc.reshape(ncube, -1).ravel())
    scalar_vals = np.concatenate(vals)
    rows3, cols3 = ops.scatter
    vals3 = np.concatenate([scalar_vals] * 3)
    nv = 3 * space.n_scalar
    return sps.coo_matrix((vals3, (rows3, cols3)), shape=(nv, nv)).tocsr()


def kkt_factor(K: sps.spmatrix, ops: StaticOperators):
    """Factor the bordered saddle system [[K, B^T, 0], [B, 0, c], [0, c^T, 0]].

    The scalar bordering row pins the pressure mean; on the periodic box the
    compatibility column keeps the system square and nonsingular.
    """
    B = ops.B
    c = sps.csc_matrix(ops.c_pressure[:, None])
    z = sps.csc_matrix((K.shape[0], 1))
    kkt = sps.bmat([[K, B.T, z], [B, None, c], [z.T, c.T, None]], format="csc")
    # the system is structurally symmetric; SuperLU's default column ordering
    # produces an order of magnitude more fill here
    return spla.splu(kkt, permc_spec="MMD_AT_PLUS_A")


def kkt_solve(lu, ops: StaticOperators, rhs_v: np.ndarray,
              rhs_p: np.ndarray | None = None):
    """Solve a factored saddle system; returns (velocity, pressure)."""
    np_ = ops.B.shape[0]
    nv = ops.B.shape[1]
    rhs = np.zeros(nv + np_ + 1)
    rhs[:nv] = rhs_v
    if rhs_p is not None:
        rhs[nv:nv + np_] = rhs_p
    sol = lu.solve(rhs)
    return sol[:nv], sol[nv:nv + np_]


def divergence_residual(ops: StaticOperators, u: np.ndarray) -> float:
    """Relative Euclidean residual of the discrete divergence constraint."""
    scale = float(np.linalg.norm(u))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(ops.B @ u) / scale)


def infsup_constant(space: TaylorHoodSpace, ops: StaticOperators | None = None,
                    include_constant_pressure: bool = False) -> float:
    """Discrete inf-sup constant via the pressure Schur complement.

    Computes the smallest generalized singular value of B relative to the
    velocity H1 norm (M + A) and the pressure L2 norm: the square root of the
    smallest nonzero eigenvalue of B (M+A)^{-1} B^T q = lam Mp q.  With
    include_constant_pressure the constant-pressure kernel direction is kept,
    which drives the value to zero.
    """
    if ops is None:
        ops = assemble_static(space)
    K = (ops.M + ops.A).tocsc()
    lu = spla.splu(K, permc_spec="MMD_AT_PLUS_A")
    Bt = np.asarray(ops.B.todense()).T          # (Nv, Np)
    S = ops.B @ lu.solve(Bt)                    # (Np, Np)
    Mp = np.asarray(ops.Mp.todense())
    from scipy.linalg import eigh

    vals = eigh(np.asarray(S), Mp, eigvals_only=True)
    vals = np.sort(vals)
    if include_constant_pressure:
        return float(np.sqrt(max(vals[0], 0.0)))
    if vals[0] > 1e-8 * max(vals[-1], 1.0):
        raise RuntimeError("constant-pressure null direction not found; "
                           "eigensolve looks unreliable")
    return float(np.sqrt(vals[1]))
