"""Structured conforming quadrilateral meshes of the plane layered structure.

The structure is ``(a, b) x (-L, L)`` with the layer ``0 < y < delta`` made
of rectangular beams of width ``width_factor * r`` centred at ``eps * xi``;
the rest of the layer is void.  The x-grid contains every beam edge and
every cell boundary, the y-grid contains ``0`` and ``delta``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..scaling import Domain, LayerScaling, PenetrationError

log = logging.getLogger(__name__)

BULK, BEAM = 0, 1


class MeshError(ValueError):
    pass


class EmptyLayerError(MeshError):
    pass


class ResolutionError(MeshError):
    pass


class JacobianError(MeshError):
    pass


@dataclass(frozen=True)
class MeshResolution:
    n_beam_x: int = 4
    n_beam_y: int = 8
    hmax: float = 0.05
    grade: float = 1.5
    width_factor: float = 2.0
    clamp: str = "bottom"        # clamped part of the lower block: bottom | bottom+sides

    def __post_init__(self):
        if self.clamp not in CLAMPS:
            raise MeshError(f"clamp must be one of {CLAMPS}, got {self.clamp!r}")

    def scaled(self, factor: float) -> "MeshResolution":
        return MeshResolution(max(1, int(round(self.n_beam_x * factor))),
                              max(1, int(round(self.n_beam_y * factor))),
                              self.hmax / factor, self.grade, self.width_factor, self.clamp)


CLAMPS = ("bottom", "bottom+sides")


def clamped_nodes(grid_id: np.ndarray, ys: np.ndarray, clamp: str = "bottom") -> np.ndarray:
    """Node ids of the clamped boundary on a lower block indexed ``grid_id[ix, jy]``."""
    bottom = grid_id[:, 0]
    if clamp == "bottom":
        return bottom
    rows = np.flatnonzero(np.asarray(ys) < 0)
    return np.unique(np.concatenate([bottom, grid_id[0, rows], grid_id[-1, rows]]))


def graded_segment(a: float, b: float, h_a: float, h_b: float, hmax: float,
                   grade: float = 1.5) -> np.ndarray:
    """Points from ``a`` to ``b`` with sizes growing from ``h_a`` (at ``a``)
    and ``h_b`` (at ``b``) by at most ``grade`` per element, capped at ``hmax``."""
    length = b - a
    if length <= 0:
        raise MeshError("empty segment")
    if grade < 1.0:
        raise MeshError("grade ratio must be >= 1")
    left, right = [], []
    hl, hr = min(h_a, hmax), min(h_b, hmax)
    total = 0.0
    while total < length - 1e-12 * length:
        if hl <= hr:
            left.append(hl)
            total += hl
            hl = min(hl * grade, hmax)
        else:
            right.append(hr)
            total += hr
            hr = min(hr * grade, hmax)
    sizes = np.array(left + right[::-1]) * (length / total)
    pts = a + np.concatenate([[0.0], np.cumsum(sizes)])
    pts[-1] = b
    return pts


def _join(pieces):
    out = [pieces[0]]
    for p in pieces[1:]:
        out.append(p[1:])
    return np.concatenate(out)


@dataclass
class Mesh2D:
    nodes: np.ndarray            # (N, 2)
    elems: np.ndarray            # (M, 4) counter-clockwise
    tag: np.ndarray              # (M,) BULK or BEAM
    region: np.ndarray           # (M,) -1 lower block, 0 beam, +1 upper block
    xs: np.ndarray
    ys: np.ndarray
    grid_id: np.ndarray          # (nx, ny) node number or -1 in the void
    gamma: np.ndarray            # clamped nodes
    sigma: np.ndarray            # nodes on y = 0, ordered by x
    sigma_plus: np.ndarray       # nodes on y = top of the layer, ordered by x
    y_sigma_plus: float
    beam_centres: np.ndarray = field(default_factory=lambda: np.zeros(0))
    beam_halfwidth: float = 0.0
    elem_centre: np.ndarray = field(default_factory=lambda: np.zeros(0))  # beam centre per element
    scaling: LayerScaling | None = None
    domain: Domain | None = None

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_nodes

    def jacobians(self) -> np.ndarray:
        """Jacobian determinants at the 2x2 Gauss points, shape ``(M, 4)``."""
        from .assembly import gauss_2x2, shape_q1

        xi, _ = gauss_2x2()
        _, dN = shape_q1(xi)
        X = self.nodes[self.elems]
        J = np.einsum("gai,eaj->egij", dN, X)
        return np.linalg.det(J)

    def aspect_ratios(self) -> np.ndarray:
        X = self.nodes[self.elems]
        hx = np.abs(X[:, 1, 0] - X[:, 0, 0])
        hy = np.abs(X[:, 3, 1] - X[:, 0, 1])
        return np.maximum(hx, hy) / np.minimum(hx, hy)

    def summary(self) -> dict:
        ar = self.aspect_ratios()
        return {"nodes": int(self.n_nodes), "elements": int(self.elems.shape[0]),
                "beam_elements": int(np.sum(self.tag == BEAM)),
                "beams": int(len(self.beam_centres)),
                "dofs": int(self.n_dofs), "max_aspect": float(ar.max())}


def structured_mesh(xs, ys, keep=None, tag=None, region=None) -> Mesh2D:
    """Tensor-product mesh on the grid ``xs x ys``; ``keep[i, j]`` selects
    element ``(i, j)``.  Nodes not touched by a kept element are dropped."""
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    nx, ny = xs.size, ys.size
    ne = (nx - 1, ny - 1)
    keep = np.ones(ne, bool) if keep is None else keep
    tag = np.zeros(ne, int) if tag is None else tag
    region = np.zeros(ne, int) if region is None else region
    used = np.zeros((nx, ny), bool)
    used[:-1, :-1] |= keep
    used[1:, :-1] |= keep
    used[1:, 1:] |= keep
    used[:-1, 1:] |= keep
    grid_id = -np.ones((nx, ny), int)
    # number column-wise in x then y: nodes along a horizontal line are contiguous
    order = np.flatnonzero(used.T.ravel())
    grid_id.T.flat[order] = np.arange(order.size)
    I, J = np.nonzero(used)
    nodes = np.empty((order.size, 2))
    nodes[grid_id[I, J]] = np.stack([xs[I], ys[J]], -1)
    ei, ej = np.nonzero(keep)
    elems = np.stack([grid_id[ei, ej], grid_id[ei + 1, ej], grid_id[ei + 1, ej + 1],
                      grid_id[ei, ej + 1]], -1)
    return Mesh2D(nodes, elems, tag[ei, ej], region[ei, ej], xs, ys, grid_id,
                  gamma=np.zeros(0, int), sigma=np.zeros(0, int), sigma_plus=np.zeros(0, int),
                  y_sigma_plus=0.0)


def _x_grid(a, b, eps, centres, half, res: MeshResolution):
    hb = 2 * half / res.n_beam_x

    def gap(lo, hi):
        return graded_segment(lo, hi, hb, hb, res.hmax, res.grade)

    bounds = np.concatenate([centres - eps / 2, [centres[-1] + eps / 2]])
    pieces = []
    if bounds[0] - a > 1e-12 * eps:
        pieces.append(gap(a, bounds[0]))
    for i, c in enumerate(centres):
        pieces += [gap(bounds[i], c - half), np.linspace(c - half, c + half, res.n_beam_x + 1),
                   gap(c + half, bounds[i + 1])]
    if b - bounds[-1] > 1e-12 * eps:
        pieces.append(gap(bounds[-1], b))
    return _join(pieces)


def build_mesh(s: LayerScaling, res: MeshResolution = MeshResolution(),
               domain: Domain = Domain(), fill_layer: bool = False) -> Mesh2D:
    """Mesh of the fine structure: lower block, resolved beams, upper block.

    ``fill_layer=True`` fills the whole layer with bulk material (a bonded
    reference on the same grid).
    """
    if domain.plane_dim != 1:
        raise MeshError("the plane solver needs a one-dimensional omega")
    half = 0.5 * res.width_factor * s.r
    if not 2 * half < s.epsilon:
        raise PenetrationError(f"beam width {2 * half:.3g} must be smaller than eps={s.epsilon}")
    if res.n_beam_x < 2 or res.n_beam_y < 2:
        need = 2 * half / 2
        raise ResolutionError(
            f"at least 2 elements per beam direction required (element size <= {need:.3g} "
            f"across, <= {s.delta / 2:.3g} along the beam)")
    (a, b), L, eps, delta = domain.omega[0], domain.L, s.epsilon, s.delta
    centres = domain.beam_centers(eps)[:, 0]
    if centres.size == 0:
        raise EmptyLayerError(f"no interior cell of size eps={eps} fits in omega={domain.omega}")
    if delta >= L:
        raise MeshError("layer thicker than the blocks")
    xs = _x_grid(a, b, eps, centres, half, res)
    hy = delta / res.n_beam_y
    top = L - delta
    ys = _join([-graded_segment(0.0, L, hy, res.hmax, res.hmax, res.grade)[::-1],
                np.linspace(0.0, delta, res.n_beam_y + 1),
                graded_segment(delta, L, hy, res.hmax, res.hmax, res.grade)])
    if top <= 0:
        raise MeshError("upper block is empty")

    xc = 0.5 * (xs[:-1] + xs[1:])
    yc = 0.5 * (ys[:-1] + ys[1:])
    in_layer = (yc > 0) & (yc < delta)
    near = np.abs(xc[:, None] - centres[None, :])
    k = np.argmin(near, axis=1)
    in_beam_x = near[np.arange(xc.size), k] < half
    keep = ~in_layer[None, :] | in_beam_x[:, None]
    tag = np.where(in_layer[None, :] & in_beam_x[:, None], BEAM, BULK)
    if fill_layer:
        keep = np.ones_like(keep)
        tag = np.full_like(tag, BULK)
    region = np.where(yc[None, :] < 0, -1, np.where(yc[None, :] > delta, 1, 0)) * np.ones((xc.size, 1), int)
    mesh = structured_mesh(xs, ys, keep, tag, region)

    ei, _ = np.nonzero(keep)
    mesh.elem_centre = np.where(mesh.tag == BEAM, centres[k[ei]], np.nan)
    j0 = int(np.argmin(np.abs(ys)))
    jd = int(np.argmin(np.abs(ys - delta)))
    mesh.gamma = clamped_nodes(mesh.grid_id, ys, res.clamp)
    mesh.sigma = mesh.grid_id[:, j0]
    mesh.sigma_plus = mesh.grid_id[:, jd]
    mesh.y_sigma_plus = float(ys[jd])
    mesh.beam_centres, mesh.beam_halfwidth = centres, half
    mesh.scaling, mesh.domain = s, domain
    if np.any(mesh.sigma < 0) or np.any(mesh.sigma_plus < 0):
        raise MeshError("interface traces are incomplete")
    det = mesh.jacobians()
    if np.any(det <= 0):
        raise JacobianError("non-positive Jacobian in the generated mesh")
    info = mesh.summary()
    log.info("mesh eps=%g: %d elements (%d in beams), %d beams, max aspect %.1f",
             eps, info["elements"], info["beam_elements"], info["beams"], info["max_aspect"])
    return mesh


def block_mesh(xs, y0: float, y1: float, h0: float, res: MeshResolution, grade_at: str = "top") -> Mesh2D:
    """A single graded block ``xs x (y0, y1)``; fine (``h0``) at ``grade_at``."""
    if grade_at == "top":
        ys = y1 - graded_segment(0.0, y1 - y0, h0, res.hmax, res.hmax, res.grade)[::-1]
    elif grade_at == "bottom":
        ys = y0 + graded_segment(0.0, y1 - y0, h0, res.hmax, res.hmax, res.grade)
    else:
        ys = np.linspace(y0, y1, max(2, int(np.ceil((y1 - y0) / res.hmax))) + 1)
    ys[0], ys[-1] = y0, y1
    return structured_mesh(xs, ys)
