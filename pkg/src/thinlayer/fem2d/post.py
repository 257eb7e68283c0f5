"""Stress recovery, interface traces and file export."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..scaling import MaterialParams
from .assembly import DisplacementField, _geometry, element_dofs, strain_matrix
from .mesh import Mesh2D, MeshError


@dataclass
class StressField:
    sigma: np.ndarray        # (M, 3) centroid values (s11, s22, s12)
    sigma33: np.ndarray      # (M,)
    von_mises: np.ndarray    # (M,)


def von_mises(s11, s22, s12, s33):
    return np.sqrt(0.5 * ((s11 - s22) ** 2 + (s22 - s33) ** 2 + (s33 - s11) ** 2) + 3 * s12 ** 2)


def _materials(mesh, mats):
    if isinstance(mats, MaterialParams):
        return {0: mats, 1: mats}
    return mats


def stress_at(mesh: Mesh2D, u: np.ndarray, mats, xi, elems=None, dof_map=None) -> np.ndarray:
    """Stress ``(m, g, 3)`` at reference points ``xi`` of the selected elements."""
    mats = _materials(mesh, mats)
    elems = np.arange(mesh.elems.shape[0]) if elems is None else np.asarray(elems)
    _, G, _, _ = _geometry(mesh, np.atleast_2d(xi))
    B = strain_matrix(G[elems])
    dofs = (element_dofs(mesh.elems) if dof_map is None else dof_map)[elems]
    eps = np.einsum("egkj,ej->egk", B, u[dofs])
    C = np.stack([mats[int(t)].plane_strain_matrix() for t in mesh.tag[elems]])
    return np.einsum("ekl,egl->egk", C, eps)


def recover_stress(u: DisplacementField, mats, mesh: Mesh2D | None = None) -> StressField:
    """Centroid stresses and plane-strain von Mises (``s33 = nu (s11 + s22)``)."""
    mesh = u.mesh if mesh is None else mesh
    mats = _materials(mesh, mats)
    sig = stress_at(mesh, u.flat, mats, [[0.0, 0.0]])[:, 0]
    nu = np.array([mats[int(t)].poisson for t in mesh.tag])
    s33 = nu * (sig[:, 0] + sig[:, 1])
    return StressField(sig, s33, von_mises(sig[:, 0], sig[:, 1], sig[:, 2], s33))


# ---------------------------------------------------------------------------
# Interface traces
# ---------------------------------------------------------------------------

@dataclass
class TraceData:
    x: np.ndarray             # interface node abscissae
    jump: np.ndarray          # (n, 2) u(x, delta) - u(x, 0)
    xq: np.ndarray            # Gauss abscissae on the upper trace
    wq: np.ndarray            # Gauss weights
    traction: np.ndarray      # (nq, 3) stress (s11, s22, s12) of the upper block at its lower face

    def cell_average(self, edges: np.ndarray, component: int) -> np.ndarray:
        """Averages of a traction component over cells ``[edges[i], edges[i+1]]``
        (edges must be element boundaries)."""
        idx = np.searchsorted(edges, self.xq) - 1
        out = np.zeros(edges.size - 1)
        ok = (idx >= 0) & (idx < out.size)
        np.add.at(out, idx[ok], self.wq[ok] * self.traction[ok, component])
        return out / np.diff(edges)


def upper_face_stress(mesh: Mesh2D, u: np.ndarray, mats, y_face: float, region: int = 1,
                      dof_map=None, n_gauss: int = 2):
    """Stress of the elements of ``region`` whose lower face lies on ``y = y_face``,
    evaluated at Gauss points of that face.  Returns ``(xq, wq, stress)``."""
    X = mesh.nodes[mesh.elems]
    sel = np.flatnonzero((mesh.region == region) & np.isclose(X[:, 0, 1], y_face, atol=1e-14))
    sel = sel[np.argsort(X[sel, 0, 0])]
    t, w = np.polynomial.legendre.leggauss(n_gauss)
    xi = np.stack([t, -np.ones_like(t)], -1)
    sig = stress_at(mesh, u, mats, xi, sel, dof_map)
    x0, x1 = X[sel, 0, 0], X[sel, 1, 0]
    xq = (0.5 * (x0 + x1)[:, None] + 0.5 * (x1 - x0)[:, None] * t).ravel()
    wq = (0.5 * (x1 - x0)[:, None] * w).ravel()
    return xq, wq, sig.reshape(-1, 3)


def lower_face_stress(mesh: Mesh2D, u: np.ndarray, mats, y_face: float, region: int = -1,
                      dof_map=None, n_gauss: int = 2):
    """As :func:`upper_face_stress` for elements whose upper face is ``y = y_face``."""
    X = mesh.nodes[mesh.elems]
    sel = np.flatnonzero((mesh.region == region) & np.isclose(X[:, 3, 1], y_face, atol=1e-14))
    sel = sel[np.argsort(X[sel, 0, 0])]
    t, w = np.polynomial.legendre.leggauss(n_gauss)
    xi = np.stack([t, np.ones_like(t)], -1)
    sig = stress_at(mesh, u, mats, xi, sel, dof_map)
    x0, x1 = X[sel, 0, 0], X[sel, 1, 0]
    xq = (0.5 * (x0 + x1)[:, None] + 0.5 * (x1 - x0)[:, None] * t).ravel()
    wq = (0.5 * (x1 - x0)[:, None] * w).ravel()
    return xq, wq, sig.reshape(-1, 3)


def trace_jump(u: DisplacementField, mats, mesh: Mesh2D | None = None) -> TraceData:
    """Jumps ``u(x, delta) - u(x, 0)`` at the interface nodes and the upper
    block stress on ``y = delta``."""
    mesh = u.mesh if mesh is None else mesh
    xa = mesh.nodes[mesh.sigma, 0]
    xb = mesh.nodes[mesh.sigma_plus, 0]
    if xa.shape != xb.shape or np.max(np.abs(xa - xb)) > 1e-13:
        raise MeshError("interface traces are not vertically aligned")
    jump = u.values[mesh.sigma_plus] - u.values[mesh.sigma]
    xq, wq, sig = upper_face_stress(mesh, u.flat, mats, mesh.y_sigma_plus)
    return TraceData(xa, jump, xq, wq, sig)


def trace_l2(x, f) -> float:
    """Exact L2 norm of the piecewise-linear interpolant of nodal samples ``f``."""
    x, f = np.asarray(x, float), np.asarray(f, float)
    a, b = f[:-1], f[1:]
    return float(np.sqrt(np.sum(np.diff(x) * (a * a + a * b + b * b)) / 3))


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def write_vtk(path, mesh: Mesh2D, u: DisplacementField | None = None,
              stress: StressField | None = None) -> Path:
    """Legacy ASCII VTK unstructured grid of quads (cell type 9)."""
    path = Path(path)
    n, m = mesh.n_nodes, mesh.elems.shape[0]
    lines = ["# vtk DataFile Version 3.0", "thinlayer", "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {n} double"]
    lines += [f"{x:.12g} {y:.12g} 0" for x, y in mesh.nodes]
    lines.append(f"CELLS {m} {5 * m}")
    lines += ["4 " + " ".join(map(str, e)) for e in mesh.elems]
    lines.append(f"CELL_TYPES {m}")
    lines += ["9"] * m
    if u is not None:
        lines += [f"POINT_DATA {n}", "VECTORS displacement double"]
        lines += [f"{a:.12g} {b:.12g} 0" for a, b in u.values]
    lines += [f"CELL_DATA {m}", "SCALARS material int 1", "LOOKUP_TABLE default"]
    lines += [str(int(t)) for t in mesh.tag]
    if stress is not None:
        lines += ["SCALARS von_mises double 1", "LOOKUP_TABLE default"]
        lines += [f"{v:.12g}" for v in stress.von_mises]
        lines += ["TENSORS stress double"]
        for (s11, s22, s12), s33 in zip(stress.sigma, stress.sigma33):
            lines.append(f"{s11:.12g} {s12:.12g} 0 {s12:.12g} {s22:.12g} 0 0 0 {s33:.12g}")
    path.write_text("\n".join(lines) + "\n")
    return path


def write_trace_csv(path, trace: TraceData) -> Path:
    """Columns ``x, jump_u1, jump_u2, sigma12_plus, sigma22_plus``; the stresses
    are interpolated from the face Gauss points to the nodes."""
    path = Path(path)
    s12 = np.interp(trace.x, trace.xq, trace.traction[:, 2])
    s22 = np.interp(trace.x, trace.xq, trace.traction[:, 1])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "jump_u1", "jump_u2", "sigma12_plus", "sigma22_plus"])
        for row in zip(trace.x, trace.jump[:, 0], trace.jump[:, 1], s12, s22):
            w.writerow([f"{v:.12e}" for v in row])
    return path
