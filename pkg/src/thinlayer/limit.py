"""Limit model: two elastic blocks coupled across ``Sigma`` by a tangential
spring, with continuous normal displacement."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .bending import (NotApplicableError, interface_load_rule, solve_bending,
                      spring_coefficient, spring_coefficient_2d)
from .fem2d.assembly import DisplacementField, SparseSystem, body_load, solve_system, stiffness
from .fem2d.mesh import Mesh2D, MeshResolution, clamped_nodes, graded_segment, structured_mesh
from .fem2d.post import lower_face_stress, upper_face_stress
from .scaling import Domain, LayerScaling, LoadSpec, MaterialParams, Regime

log = logging.getLogger(__name__)


class ConfigurationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Interface model
# ---------------------------------------------------------------------------

@dataclass
class InterfaceModel:
    """Spring ``k`` and interface loads.  ``F_bar(x) -> (n, 2)`` acts on the lower
    trace, ``g(x) -> (n,)`` on the tangential jump.  ``k=None`` means bonded."""

    k: Optional[float]
    F_bar: Callable = None
    g: Callable = None
    variant: str = "paper"
    regime: Regime = Regime.CASE_II

    def __post_init__(self):
        if self.F_bar is None:
            self.F_bar = lambda x: np.zeros((np.size(x), 2))
        if self.g is None:
            self.g = lambda x: np.zeros(np.size(x))


def _beam_load_moments(load: LoadSpec, n: int = 8):
    """``F_bar(x)`` and ``F_tilde(x, X3)`` for the plane reference beam ``(-1, 1) x (0, 1)``."""
    t, w = np.polynomial.legendre.leggauss(n)
    X1, w1 = t, w
    X3, w3 = 0.5 * (t + 1), 0.5 * w

    def F_bar(x):
        x = np.atleast_1d(np.asarray(x, float))
        c = np.broadcast_to(x[:, None, None], (x.size, n, n))[..., None]
        Xp = np.broadcast_to(X1[None, :, None], (x.size, n, n))[..., None]
        Z = np.broadcast_to(X3[None, None, :], (x.size, n, n))
        vals = load.beam(c, Xp, Z)
        return np.einsum("xijc,i,j->xc", vals, w1, w3)

    def F_tilde(x, Xa):
        Xa = np.asarray(Xa, float)
        flat = Xa.ravel()
        c = np.full((flat.size, n, 1), float(x))
        Xp = np.broadcast_to(X1[None, :, None], (flat.size, n, 1))
        Z = np.broadcast_to(flat[:, None], (flat.size, n))
        vals = load.beam(c, Xp, Z)
        return np.einsum("ai,i->a", vals[..., 0], w1).reshape(Xa.shape)

    return F_bar, F_tilde


def interface_model(s: LayerScaling, E_m: float, load: LoadSpec, variant: str = "paper",
                    width_factor: float = 2.0, k_scale: float = 1.0) -> InterfaceModel:
    """Spring and loads of the limit interface.

    ``variant="paper"`` uses ``3 pi kappa0^4 E_m / kappa1^3``; ``"2d"`` the
    plane clamped-guided beam constant for the current ``eps``.
    """
    if not s.regime.critical:
        return InterfaceModel(None, variant="bonded", regime=s.regime)
    try:
        if variant == "paper":
            k = spring_coefficient(s, E_m)
        elif variant == "2d":
            k = spring_coefficient_2d(s, E_m, width_factor)
        else:
            raise ConfigurationError(f"unknown spring variant {variant!r}")
    except NotApplicableError as exc:
        raise ConfigurationError(str(exc)) from exc
    F_bar, F_tilde = _beam_load_moments(load)

    pts, wts = interface_load_rule()

    def g(x):
        x = np.atleast_1d(np.asarray(x, float))
        return np.array([wts @ F_tilde(xi, pts) for xi in x])

    model = InterfaceModel(k * k_scale, F_bar, g, variant, s.regime)
    model.F_tilde = F_tilde
    return model


# ---------------------------------------------------------------------------
# Mesh with duplicated tangential dofs
# ---------------------------------------------------------------------------

@dataclass
class LimitMesh:
    mesh: Mesh2D                  # both blocks, upper nodes numbered after lower ones
    dof: np.ndarray               # (N, 2) global dof of each nodal component
    n_dofs: int
    lower_top: np.ndarray         # interface nodes of the lower block, by x
    upper_bottom: np.ndarray      # interface nodes of the upper block, by x
    x_sigma: np.ndarray
    bonded: bool = False

    @property
    def elem_dofs(self) -> np.ndarray:
        return self.dof[self.mesh.elems].reshape(-1, 8)


def _concat(lower: Mesh2D, upper: Mesh2D, clamp: str = "bottom") -> Mesh2D:
    nl = lower.n_nodes
    m = structured_mesh([0.0, 1.0], [0.0, 1.0])
    m.nodes = np.concatenate([lower.nodes, upper.nodes])
    m.elems = np.concatenate([lower.elems, upper.elems + nl])
    m.tag = np.zeros(m.elems.shape[0], int)
    m.region = np.concatenate([-np.ones(lower.elems.shape[0], int), np.ones(upper.elems.shape[0], int)])
    m.xs = lower.xs
    m.ys = np.concatenate([lower.ys, upper.ys[1:]])
    m.grid_id = None
    m.gamma = clamped_nodes(lower.grid_id, lower.ys, clamp)
    m.sigma = lower.grid_id[:, -1]
    m.sigma_plus = upper.grid_id[:, 0] + nl
    m.y_sigma_plus = 0.0
    return m


def build_limit_mesh(xs, ys_lower, ys_upper, bonded: bool = False, clamp: str = "bottom") -> LimitMesh:
    """Blocks ``xs x ys_lower`` (ending at 0) and ``xs x ys_upper`` (starting at 0)."""
    ys_lower, ys_upper = np.asarray(ys_lower, float), np.asarray(ys_upper, float)
    if abs(ys_lower[-1]) > 0 or abs(ys_upper[0]) > 0:
        raise ValueError("blocks must meet at y = 0")
    lower = structured_mesh(xs, ys_lower)
    upper = structured_mesh(xs, ys_upper)
    mesh = _concat(lower, upper, clamp)
    N = mesh.n_nodes
    dof = np.arange(2 * N).reshape(N, 2)
    lo, up = mesh.sigma, mesh.sigma_plus
    dof[up, 1] = dof[lo, 1]           # shared normal component
    if bonded:
        dof[up, 0] = dof[lo, 0]
    used, inv = np.unique(dof, return_inverse=True)
    dof = inv.reshape(N, 2)
    return LimitMesh(mesh, dof, used.size, lo, up, mesh.nodes[lo, 0].copy(), bonded)


def limit_mesh_for(xs, s: LayerScaling, res: MeshResolution, domain: Domain = Domain(),
                   bonded: bool = False) -> LimitMesh:
    """Limit mesh sharing the x-grid and the block grading of a fine mesh."""
    hy = s.delta / res.n_beam_y
    L = domain.L
    ys_lower = -graded_segment(0.0, L, hy, res.hmax, res.hmax, res.grade)[::-1]
    ys_upper = graded_segment(0.0, L, hy, res.hmax, res.hmax, res.grade)
    return build_limit_mesh(xs, ys_lower, ys_upper, bonded, res.clamp)


def interface_mass(x) -> sp.csr_matrix:
    """Consistent P1 mass matrix on the nodes ``x``."""
    h = np.diff(x)
    n = x.size
    main = np.zeros(n)
    main[:-1] += h / 3
    main[1:] += h / 3
    return sp.diags([h / 6, main, h / 6], [-1, 0, 1], format="csr")


def jump_operator(lm: LimitMesh, comp: int = 0) -> sp.csr_matrix:
    """Rows map the global dof vector to ``u_comp(+) - u_comp(-)`` at interface nodes."""
    n = lm.x_sigma.size
    rows = np.concatenate([np.arange(n), np.arange(n)])
    cols = np.concatenate([lm.dof[lm.upper_bottom, comp], lm.dof[lm.lower_top, comp]])
    vals = np.concatenate([np.ones(n), -np.ones(n)])
    J = sp.csr_matrix((vals, (rows, cols)), shape=(n, lm.n_dofs))
    J.sum_duplicates()
    J.eliminate_zeros()
    return J


def interface_stiffness(lm: LimitMesh, k: float) -> sp.csr_matrix:
    J = jump_operator(lm, 0)
    return (k * (J.T @ interface_mass(lm.x_sigma) @ J)).tocsr()


def assemble_limit(lm: LimitMesh, mat_bulk: MaterialParams, im: InterfaceModel,
                   F: Callable) -> SparseSystem:
    """Stiffness and load of the limit problem; ``F(x) -> (.., 2)`` is the bulk load."""
    if lm.bonded != (im.k is None):
        if im.k is None and im.regime.critical:
            raise ConfigurationError("critical regime needs a spring coefficient")
        if im.k is None:
            raise ConfigurationError("bonded interface model on a mesh with duplicated dofs")
        raise ConfigurationError("spring interface model on a bonded mesh")
    ed = lm.elem_dofs
    K = stiffness(lm.mesh, {0: mat_bulk}, dof_map=ed, n=lm.n_dofs)
    f = body_load(lm.mesh, lambda xq, idx: F(xq), dof_map=ed, n=lm.n_dofs)
    M = interface_mass(lm.x_sigma)
    x = lm.x_sigma
    Fb = np.asarray(im.F_bar(x), float)
    for c in range(2):
        np.add.at(f, lm.dof[lm.lower_top, c], M @ Fb[:, c])
    bulk = K
    if not lm.bonded:
        K = K + interface_stiffness(lm, im.k)
        J = jump_operator(lm, 0)
        f += J.T @ (M @ np.asarray(im.g(x), float))
    gamma = lm.mesh.gamma
    cd = np.unique(lm.dof[gamma].ravel())
    return SparseSystem(K.tocsr(), f, cd, mesh=lm.mesh,
                        meta={"k": im.k, "variant": im.variant, "dofs": lm.n_dofs,
                              "bulk_matrix": bulk.tocsr()})


@dataclass
class LimitSolution:
    u: DisplacementField          # nodal values on the combined mesh
    x: np.ndarray                 # interface abscissae
    jump: np.ndarray              # (n, 2) u(+) - u(-) on Sigma
    coeffs: np.ndarray            # global dof vector
    system: SparseSystem
    lm: LimitMesh
    residual: float = 0.0
    info: dict = field(default_factory=dict)

    def energy(self) -> float:
        return float(self.system.rhs @ self.coeffs)


def jump_basis(lm: LimitMesh) -> sp.csr_matrix:
    """``T`` with ``u = T z`` where ``z`` holds the tangential jump in place of
    the upper interface value.  A stiff spring then acts on single diagonal
    entries instead of nearly cancelling pairs."""
    n = lm.n_dofs
    T = sp.identity(n, format="lil")
    T[lm.dof[lm.upper_bottom, 0], lm.dof[lm.lower_top, 0]] = 1.0
    return T.tocsr()


def solve_limit(sys_: SparseSystem, lm: LimitMesh, tol: float = 1e-9, method: str = "auto",
                use_jump_basis: bool = True) -> LimitSolution:
    if use_jump_basis and not lm.bonded:
        T = jump_basis(lm)
        bulk = sys_.meta.get("bulk_matrix")
        if bulk is not None:
            # add the spring in z coordinates: transforming k J^T M J would
            # cancel large entries against each other
            jz = lm.dof[lm.upper_bottom, 0]
            Sel = sp.csr_matrix((np.ones(jz.size), (np.arange(jz.size), jz)), shape=(jz.size, lm.n_dofs))
            Kz = T.T @ bulk @ T + sys_.meta["k"] * (Sel.T @ interface_mass(lm.x_sigma) @ Sel)
        else:
            Kz = T.T @ sys_.matrix @ T
        zsys = SparseSystem(Kz.tocsr(), T.T @ sys_.rhs, sys_.constrained_dofs,
                            sys_.constrained_values, sys_.mesh, sys_.meta)
        z, rel, used = solve_system(zsys, tol, method)
        x = T @ z
    else:
        x, rel, used = solve_system(sys_, tol, method)
    vals = x[lm.dof]
    jump = vals[lm.upper_bottom] - vals[lm.lower_top]
    field_ = DisplacementField(vals, lm.mesh, rel, used)
    return LimitSolution(field_, lm.x_sigma, jump, x, sys_, lm, rel)


def limit_traces(sol: LimitSolution, mat: MaterialParams):
    """Stress at Gauss points of both interface faces: ``(xq, wq, sigma_plus, sigma_minus)``."""
    ed = sol.lm.elem_dofs
    xq, wq, sp_ = upper_face_stress(sol.lm.mesh, sol.coeffs, mat, 0.0, 1, ed)
    xm, _, sm = lower_face_stress(sol.lm.mesh, sol.coeffs, mat, 0.0, -1, ed)
    if np.max(np.abs(xq - xm)) > 1e-13:
        raise ValueError("interface faces are not aligned")
    return xq, wq, sp_, sm


def traction_balance(sol: LimitSolution, mat: MaterialParams, F: Callable, im: InterfaceModel) -> float:
    """Relative weak residual of ``[sigma_i2] = F_bar_i`` on the shared normal dofs.

    The internal force of each block minus its body load is its weak
    interface traction; their sum must reproduce the ``F_bar`` load vector.
    """
    lm = sol.lm
    ed = lm.elem_dofs
    parts = []
    for reg in (-1, 1):
        mask = lm.mesh.region == reg
        sub = Mesh2D(lm.mesh.nodes, lm.mesh.elems[mask], lm.mesh.tag[mask], lm.mesh.region[mask],
                     lm.mesh.xs, lm.mesh.ys, None, lm.mesh.gamma, lm.mesh.sigma, lm.mesh.sigma_plus, 0.0)
        K = stiffness(sub, {0: mat}, dof_map=ed[mask], n=lm.n_dofs)
        f = body_load(sub, lambda xq, idx: F(xq), dof_map=ed[mask], n=lm.n_dofs)
        parts.append(K @ sol.coeffs - f)
    M = interface_mass(lm.x_sigma)
    normal = lm.dof[lm.lower_top, 1]
    target = M @ np.asarray(im.F_bar(lm.x_sigma), float)[:, 1]
    r = (parts[0] + parts[1])[normal]
    scale = max(np.linalg.norm(target), np.linalg.norm(parts[0][normal]), 1e-300)
    return float(np.linalg.norm(r - target) / scale)


def reconstruct_layer(sol: LimitSolution, F_tilde=None, n: int = 201, D: float = np.pi / 4):
    """Bending profile of the limit beam above every interface node."""
    out = []
    um = sol.u.values[sol.lm.lower_top, :1]
    up = sol.u.values[sol.lm.upper_bottom, :1]
    for i, x in enumerate(sol.x):
        load = 0.0 if F_tilde is None else (lambda X, x=x: F_tilde(x, X))
        out.append(solve_bending(load, um[i], up[i], n=n, D=D))
    return out
