"""Bilinear plane-strain elasticity: assembly and linear solve."""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..scaling import LayerScaling, LoadSpec, MaterialParams, beam_load_factor
from .mesh import BEAM, JacobianError, Mesh2D

log = logging.getLogger(__name__)

DIRECT_LIMIT = int(os.environ.get("THINLAYER_DIRECT_LIMIT", 400_000))


class SolverError(RuntimeError):
    def __init__(self, msg, history=()):
        super().__init__(msg)
        self.history = list(history)


def gauss_2x2():
    g = 1 / np.sqrt(3)
    xi = np.array([[-g, -g], [g, -g], [g, g], [-g, g]])
    return xi, np.ones(4)


def shape_q1(xi):
    """Values ``(g, 4)`` and reference gradients ``(g, 4, 2)`` of Q1 shape functions."""
    xi = np.atleast_2d(xi)
    s, t = xi[:, 0], xi[:, 1]
    sv = np.array([-1, 1, 1, -1])
    tv = np.array([-1, -1, 1, 1])
    N = 0.25 * (1 + s[:, None] * sv) * (1 + t[:, None] * tv)
    dN = np.stack([0.25 * sv * (1 + t[:, None] * tv), 0.25 * tv * (1 + s[:, None] * sv)], -1)
    return N, dN


def _geometry(mesh: Mesh2D, xi):
    N, dN = shape_q1(xi)
    X = mesh.nodes[mesh.elems]                       # (M, 4, 2)
    J = np.einsum("gai,eaj->egij", dN, X)            # d x_j / d xi_i
    det = np.linalg.det(J)
    if np.any(det <= 0):
        bad = int(np.argwhere(det <= 0)[0, 0])
        raise JacobianError(f"element {bad} has a non-positive Jacobian")
    G = np.einsum("egij,gaj->egai", np.linalg.inv(J), dN)   # physical gradients
    xq = np.einsum("ga,eai->egi", N, X)
    return N, G, det, xq


def strain_matrix(G):
    """Voigt strain-displacement matrices ``(..., 3, 8)`` from gradients ``(..., 4, 2)``."""
    B = np.zeros(G.shape[:-2] + (3, 8))
    B[..., 0, 0::2] = G[..., 0]
    B[..., 1, 1::2] = G[..., 1]
    B[..., 2, 0::2] = G[..., 1]
    B[..., 2, 1::2] = G[..., 0]
    return B


def element_dofs(elems):
    return np.stack([2 * elems, 2 * elems + 1], -1).reshape(elems.shape[0], 8)


@dataclass
class SparseSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    constrained_dofs: np.ndarray
    constrained_values: np.ndarray = None
    mesh: Optional[Mesh2D] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.constrained_values is None:
            self.constrained_values = np.zeros(self.constrained_dofs.size)

    @property
    def n(self) -> int:
        return self.rhs.size

    def with_dirichlet(self, dofs, values) -> "SparseSystem":
        dofs = np.asarray(dofs, int)
        vals = np.broadcast_to(np.asarray(values, float), dofs.shape)
        return SparseSystem(self.matrix, self.rhs, dofs, vals.copy(), self.mesh, dict(self.meta))


def stiffness(mesh: Mesh2D, materials: dict[int, MaterialParams], dof_map=None,
              n: Optional[int] = None) -> sp.csr_matrix:
    """Global stiffness; ``materials`` maps element tags to materials.
    ``dof_map`` (element, 8) overrides the default numbering."""
    xi, w = gauss_2x2()
    _, G, det, _ = _geometry(mesh, xi)
    B = strain_matrix(G)                                   # (M, g, 3, 8)
    C = np.stack([materials[int(t)].plane_strain_matrix() for t in mesh.tag])
    Ke = np.einsum("egki,ekl,eglj,eg->eij", B, C, B, det * w)
    dofs = element_dofs(mesh.elems) if dof_map is None else dof_map
    if n is None:
        n = 2 * mesh.n_nodes if dof_map is None else int(dof_map.max()) + 1
    rows = np.repeat(dofs, 8, axis=1).ravel()
    cols = np.tile(dofs, (1, 8)).ravel()
    K = sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(n, n))
    K.sum_duplicates()
    return K


def body_load(mesh: Mesh2D, density: Callable, mask=None, dof_map=None, n=None) -> np.ndarray:
    """Consistent load vector of ``density(xq, elem_index) -> (.., 2)``."""
    xi, w = gauss_2x2()
    N, _, det, xq = _geometry(mesh, xi)
    idx = np.arange(mesh.elems.shape[0]) if mask is None else np.flatnonzero(mask)
    n = 2 * mesh.n_nodes if n is None else n
    f = np.zeros(n)
    if idx.size == 0:
        return f
    fq = np.asarray(density(xq[idx], idx), float)          # (m, g, 2)
    fe = np.einsum("ga,egc,eg->eac", N, fq, det[idx] * w)  # (m, 4, 2)
    dofs = (element_dofs(mesh.elems) if dof_map is None else dof_map)[idx]
    np.add.at(f, dofs.ravel(), fe.reshape(idx.size, 8).ravel())
    return f


def fine_density(mesh: Mesh2D, load: LoadSpec, s: LayerScaling):
    """Force density of the fine structure, blocks and beams separately."""
    factor = beam_load_factor(s, 2)
    half = mesh.beam_halfwidth

    def density(xq, idx):
        out = np.empty(xq.shape)
        beam = mesh.tag[idx] == BEAM
        if np.any(~beam):
            out[~beam] = load.f_bulk(xq[~beam])
        if np.any(beam):
            c = mesh.elem_centre[idx][beam][:, None] * np.ones(xq.shape[1])
            Xp = ((xq[beam, :, 0] - c) / half)[..., None]
            X3 = xq[beam, :, 1] / s.delta
            out[beam] = factor * load.beam(c[..., None], Xp, X3)
        return out

    return density


def assemble(mesh: Mesh2D, mat_bulk: MaterialParams, mat_beam: MaterialParams,
             load: LoadSpec, s: LayerScaling) -> SparseSystem:
    """Stiffness, load vector and clamped dofs on ``Gamma`` for the fine structure."""
    K = stiffness(mesh, {0: mat_bulk, 1: mat_beam})
    f = body_load(mesh, fine_density(mesh, load, s))
    cdofs = np.concatenate([2 * mesh.gamma, 2 * mesh.gamma + 1])
    return SparseSystem(K, f, np.sort(cdofs), mesh=mesh, meta={"dofs": int(f.size)})


@dataclass
class DisplacementField:
    values: np.ndarray             # (N, 2) nodal displacements
    mesh: Optional[Mesh2D] = None
    residual: float = 0.0
    method: str = ""

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()


def _residual(A: sp.csr_matrix, x, b) -> np.ndarray:
    """``b - A x`` accumulated in extended precision."""
    prod = A.data.astype(np.longdouble) * x.astype(np.longdouble)[A.indices]
    Ax = np.zeros(A.shape[0], dtype=np.longdouble)
    nz = np.diff(A.indptr) > 0
    Ax[nz] = np.add.reduceat(prod, A.indptr[:-1][nz])
    return (b.astype(np.longdouble) - Ax).astype(float)


def solve_system(sys_: SparseSystem, tol: float = 1e-9, method: str = "auto",
                 maxiter: int = 20000):
    """Solve with the Dirichlet dofs eliminated.  Returns ``(u, rel_residual, method)``."""
    n = sys_.n
    u = np.zeros(n)
    u[sys_.constrained_dofs] = sys_.constrained_values
    free = np.ones(n, bool)
    free[sys_.constrained_dofs] = False
    K = sys_.matrix
    Kff = K[free][:, free].tocsr()
    b = sys_.rhs[free] - K[free] @ u
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return u, 0.0, "trivial"
    if method == "auto":
        method = "direct" if free.sum() <= DIRECT_LIMIT else "cg"
    history = []
    if method == "direct":
        # symmetric Jacobi scaling, then LU with a few refinement sweeps
        d = 1.0 / np.sqrt(Kff.diagonal())
        D = sp.diags(d)
        lu = spla.splu((D @ Kff @ D).tocsc())
        x = d * lu.solve(d * b)
        for _ in range(6):
            res = _residual(Kff, x, b)
            if np.linalg.norm(res) <= 0.01 * tol * nb:
                break
            x = x + d * lu.solve(d * res)
    elif method == "cg":
        ilu = spla.spilu(Kff.tocsc(), drop_tol=1e-5, fill_factor=20)
        M = spla.LinearOperator(Kff.shape, ilu.solve)

        def cb(xk):
            history.append(float(np.linalg.norm(b - Kff @ xk) / nb))

        x, info = spla.cg(Kff, b, rtol=tol * 0.1, maxiter=maxiter, M=M, callback=cb)
        if info != 0:
            raise SolverError(f"CG did not converge ({info} iterations)", history)
    else:
        raise ValueError(f"unknown solver {method!r}")
    rel = float(np.linalg.norm(_residual(Kff, x, b)) / nb)
    if rel > tol:
        raise SolverError(f"relative residual {rel:.3e} above {tol:.1e}", history + [rel])
    u[free] = x
    return u, rel, method


def solve(sys_: SparseSystem, tol: float = 1e-9, method: str = "auto") -> DisplacementField:
    u, rel, used = solve_system(sys_, tol, method)
    log.info("solved %d dofs (%s), residual %.2e", u.size, used, rel)
    return DisplacementField(u.reshape(-1, 2), sys_.mesh, rel, used)


def energy(sys_: SparseSystem, u: DisplacementField) -> tuple[float, float]:
    """``(u.K.u, f.u)``; equal at the solution for homogeneous constraints."""
    x = u.flat
    return float(x @ (sys_.matrix @ x)), float(sys_.rhs @ x)


def solver_threads() -> int:
    return int(os.environ.get("THINLAYER_THREADS", "1"))
