"""Discrete unfolding operators on boxes.

Three operators map fields on the layer to fields on fixed product domains:

* ``T``   : ``phi(s, x3)``            -> ``phi(s, delta X3)``             on ``omega x (0, 1)``
* ``T'``  : ``phi(s, x', x3)``        -> ``phi(s, r X', delta X3)``       on ``omega x B_1``
* ``T''`` : ``phi(x')``               -> ``phi(eps [s/eps]_Y + eps y)``   on ``omega x Y``

All three vanish on the boundary layer ``Lambda_eps = omega \\ omega_hat``,
the part of ``omega`` not covered by whole interior cells.  Unfolded fields
are stored as arrays over (macro samples) x (reference samples).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .beam import BeamFrame, SectionQuadrature
from .scaling import LayerScaling, cell_index, interior_indices_1d


class CutoffError(ValueError):
    pass


@dataclass(frozen=True)
class CellGrid:
    """Cells ``eps (xi + Y)`` of a box ``omega``; ``interior_cells`` are the
    ``xi`` whose closed cell lies in ``omega``."""

    omega: tuple
    epsilon: float

    @property
    def dim(self) -> int:
        return len(self.omega)

    @property
    def axes(self) -> list[np.ndarray]:
        return [interior_indices_1d(a, b, self.epsilon) for a, b in self.omega]

    @property
    def interior_cells(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    @property
    def hat_bounds(self) -> tuple:
        """Bounding box of ``omega_hat`` (an empty axis gives ``(nan, nan)``)."""
        out = []
        for ax in self.axes:
            if ax.size == 0:
                out.append((np.nan, np.nan))
            else:
                out.append(((ax[0] - 0.5) * self.epsilon, (ax[-1] + 0.5) * self.epsilon))
        return tuple(out)

    def in_hat(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        ok = np.ones(s.shape[:-1], dtype=bool)
        for k, (a, b) in enumerate(self.hat_bounds):
            ok &= (s[..., k] >= a) & (s[..., k] < b)
        return ok

    def in_boundary_layer(self, s) -> np.ndarray:
        return ~self.in_hat(s)

    def cell_centre(self, s) -> np.ndarray:
        return self.epsilon * cell_index(np.asarray(s, dtype=float) / self.epsilon)

    def macro_quadrature(self, n: int = 3):
        """Gauss points/weights covering ``omega_hat`` cell by cell."""
        t, w = np.polynomial.legendre.leggauss(n)
        eps = self.epsilon
        loc = [0.5 * eps * t] * self.dim
        wl = [0.5 * eps * w] * self.dim
        L = np.stack([g.ravel() for g in np.meshgrid(*loc, indexing="ij")], axis=-1)
        WL = np.prod(np.stack([g.ravel() for g in np.meshgrid(*wl, indexing="ij")], -1), -1)
        centres = eps * self.interior_cells
        pts = (centres[:, None, :] + L[None]).reshape(-1, self.dim)
        wts = np.tile(WL, centres.shape[0])
        return pts, wts

    def boundary_layer_samples(self, n: int = 4) -> np.ndarray:
        """A few points of ``Lambda_eps`` (for zero-extension checks)."""
        pts = []
        for k, (a, b) in enumerate(self.omega):
            ha, hb = self.hat_bounds[k]
            for lo, hi in ((a, ha), (hb, b)):
                if np.isfinite(lo) and np.isfinite(hi) and hi - lo > 1e-14:
                    side = np.linspace(lo, hi, n + 2)[1:-1]
                    other = [np.linspace(p, q, n + 2)[1:-1] for p, q in self.omega]
                    other[k] = side
                    g = np.meshgrid(*other, indexing="ij")
                    pts.append(np.stack([x.ravel() for x in g], axis=-1))
        return np.concatenate(pts) if pts else np.zeros((0, self.dim))


@dataclass
class UnfoldedField:
    s: np.ndarray          # (Ns, dim) macro samples
    X: np.ndarray          # (NX, k) reference samples
    values: np.ndarray     # (Ns, NX, ...) zero where ``~hat``
    hat: np.ndarray        # (Ns,) True on omega_hat


def _broadcast(s, X):
    s = np.atleast_2d(np.asarray(s, dtype=float))
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    S = np.broadcast_to(s[:, None, :], (s.shape[0], X.shape[0], s.shape[1]))
    XX = np.broadcast_to(X[None, :, :], (s.shape[0],) + X.shape)
    return s, X, S, XX


def _mask(values, hat):
    values = np.asarray(values, dtype=float)
    m = hat.reshape(hat.shape + (1,) * (values.ndim - 1))
    return np.where(m, values, 0.0)


def unfold_T(phi: Callable, grid: CellGrid, delta: float, s, X3) -> UnfoldedField:
    """``(s, X3) -> phi(s, delta X3)`` on ``omega_hat``; ``phi(S, x3)``."""
    s, X, S, XX = _broadcast(s, X3)
    hat = grid.in_hat(s)
    return UnfoldedField(s, X, _mask(phi(S, delta * XX[..., 0]), hat), hat)


def unfold_Tprime(phi: Callable, grid: CellGrid, r: float, delta: float, s, X) -> UnfoldedField:
    """``(s, X) -> phi(s, r X1, r X2, delta X3)`` on ``omega_hat``; ``phi(S, x)``
    with ``x`` the local beam coordinates."""
    s, X, S, XX = _broadcast(s, X)
    scale = np.array([r] * (X.shape[1] - 1) + [delta])
    hat = grid.in_hat(s)
    return UnfoldedField(s, X, _mask(phi(S, XX * scale), hat), hat)


def unfold_Tsecond(phi: Callable, grid: CellGrid, s, y) -> UnfoldedField:
    """Classical unfolding ``(s, y) -> phi(eps [s/eps]_Y + eps y)``."""
    s, Y, S, YY = _broadcast(s, y)
    hat = grid.in_hat(s)
    centre = grid.epsilon * cell_index(S / grid.epsilon)
    return UnfoldedField(s, Y, _mask(phi(centre + grid.epsilon * YY), hat), hat)


def unfolded_derivative(phi: Callable, grid: CellGrid, r: float, delta: float, s, X,
                        axis: int, h: float = 1e-4) -> np.ndarray:
    """Central difference of ``T'(phi)`` in reference coordinate ``axis``."""
    X = np.asarray(X, dtype=float)
    e = np.zeros(X.shape[1])
    e[axis] = h
    plus = unfold_Tprime(phi, grid, r, delta, s, X + e).values
    minus = unfold_Tprime(phi, grid, r, delta, s, X - e).values
    return (plus - minus) / (2 * h)


def reference_beam_quadrature(n_radial: int = 4, n_angular: int = 16, n_axial: int = 4):
    """Tensor quadrature on ``B_1 = D_1 x (0, 1)``: points ``(N, 3)`` and weights."""
    from .beam import section_quadrature

    q = section_quadrature(1.0, n_radial, n_angular)
    t, w = np.polynomial.legendre.leggauss(n_axial)
    z, wz = 0.5 * (t + 1), 0.5 * w
    pts = np.concatenate([np.repeat(q.nodes, z.size, axis=0),
                          np.tile(z, q.nodes.shape[0])[:, None]], axis=1)
    return pts, np.outer(q.weights, wz).ravel()


# ---------------------------------------------------------------------------
# Unfolded strain of a decomposed beam field
# ---------------------------------------------------------------------------

STRAIN_KEYS = ("11", "22", "12", "13", "23", "33")


def unfolded_strain(frame: BeamFrame, warp_grad: np.ndarray, quad: SectionQuadrature,
                    s: LayerScaling) -> dict:
    """Unfolded symmetric strain of a beam field assembled from its
    decomposition.

    ``warp_grad[k, q]`` is the gradient of the warping at ``(quad.nodes[q],
    frame.z[k])``.  The beam must be ``D_r x (0, delta)``; the result is
    indexed by ``(X3 = z/delta, X' = x'/r)`` and keyed by ``"ij"``.
    """
    if warp_grad is None:
        raise ValueError("unfolded strain needs the warping gradient of a decomposed field")
    r, delta = s.r, s.delta
    dU, dR = frame.axial_derivatives()
    # d/dX3 of T(f) is delta * df/dx3
    dTU = delta * dU
    dTR = delta * dR
    X1 = (quad.nodes[:, 0] / r)[None, :]
    X2 = (quad.nodes[:, 1] / r)[None, :]
    ew = 0.5 * (warp_grad + np.swapaxes(warp_grad, -1, -2))
    U1p, U2p, U3p = (dTU[:, k, None] for k in range(3))
    R1, R2 = frame.R[:, 0, None], frame.R[:, 1, None]
    dR1, dR2, dR3 = (dTR[:, k, None] for k in range(3))
    return {
        "11": ew[..., 0, 0],
        "22": ew[..., 1, 1],
        "12": ew[..., 0, 1],
        "13": 0.5 * ((U1p / delta - R2) - r / delta * dR3 * X2) + ew[..., 0, 2],
        "23": 0.5 * ((U2p / delta + R1) + r / delta * dR3 * X1) + ew[..., 1, 2],
        "33": U3p / delta + r / delta * dR1 * X2 - r / delta * dR2 * X1 + ew[..., 2, 2],
    }


def direct_strain(grad: np.ndarray) -> dict:
    e = 0.5 * (grad + np.swapaxes(grad, -1, -2))
    idx = {"11": (0, 0), "22": (1, 1), "12": (0, 1), "13": (0, 2), "23": (1, 2), "33": (2, 2)}
    return {k: e[..., i, j] for k, (i, j) in idx.items()}


# ---------------------------------------------------------------------------
# Cutoff around the beam feet
# ---------------------------------------------------------------------------

def _smoothstep5(t):
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (10 - 15 * t + 6 * t ** 2)


def _smoothstep5_d(t):
    inside = (t > 0) & (t < 1)
    return np.where(inside, 30 * t ** 2 * (1 - t) ** 2, 0.0)


@dataclass(frozen=True)
class RadialBump:
    """``chi = 1`` on ``D_inner``, ``0`` outside ``D_outer``, quintic (C^2) in between."""

    inner: float = 1.0
    outer: float = 2.0

    @property
    def support_radius(self) -> float:
        return self.outer

    def __call__(self, y):
        rho = np.linalg.norm(np.asarray(y, dtype=float), axis=-1)
        return 1.0 - _smoothstep5((rho - self.inner) / (self.outer - self.inner))

    def gradient(self, y):
        y = np.asarray(y, dtype=float)
        rho = np.linalg.norm(y, axis=-1)
        dr = -_smoothstep5_d((rho - self.inner) / (self.outer - self.inner)) / (self.outer - self.inner)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(rho[..., None] > 0, y / rho[..., None], 0.0)
        return dr[..., None] * unit


def cutoff_field(phi: Callable, chi: RadialBump, eps: float, r: float) -> Callable:
    """``x' -> chi((eps/r){x'/eps}) phi(eps [x'/eps]) + (1 - chi(...)) phi(x')``."""
    if not r * chi.support_radius / eps < 0.5:
        raise CutoffError(f"r R / eps = {r * chi.support_radius / eps:.3g} must be < 1/2")

    def field(x):
        x = np.asarray(x, dtype=float)
        centre = eps * cell_index(x / eps)
        c = chi((x - centre) / r)
        return c * phi(centre) + (1 - c) * phi(x)

    return field


@dataclass(frozen=True)
class CutoffReport:
    linf: float          # ||phi_eps_r - phi||_inf
    grad_lp: float       # ||grad(phi_eps_r - phi)||_p
    p: float
    bound_linf: float    # eps ||chi||_inf ||grad phi||_inf over the sampled points


def cutoff_phi(phi: Callable, grad_phi: Optional[Callable], omega: tuple, eps: float, r: float,
               chi: Optional[RadialBump] = None, p: float = 2.0, n_radial: int = 16,
               n_angular: int = 64) -> CutoffReport:
    """Norms of ``phi_eps_r - phi`` on a box ``omega``.

    The difference is supported in the discs ``D_{R r}`` around the cell
    centres; each disc is integrated with a polar rule split at the radii
    where ``chi`` changes formula.  ``grad_phi=None`` falls back to central
    differences.
    """
    chi = RadialBump() if chi is None else chi
    field = cutoff_field(phi, chi, eps, r)
    dim = len(omega)
    if dim != 2:
        raise ValueError("the cutoff construction is implemented for planar omega")

    # cells meeting omega
    axes = [np.arange(int(np.floor(a / eps + 0.5)), int(np.ceil(b / eps - 0.5)) + 1) for a, b in omega]
    centres = eps * np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], -1).astype(float)

    pieces = [(0.0, chi.inner), (chi.inner, chi.outer)]
    rho, wrho = [], []
    t, w = np.polynomial.legendre.leggauss(n_radial)
    for a, b in pieces:
        rr = a + 0.5 * (b - a) * (t + 1)
        rho.append(rr)
        wrho.append(0.5 * (b - a) * w * rr)
    rho, wrho = r * np.concatenate(rho), r ** 2 * np.concatenate(wrho)
    th = 2 * np.pi * (np.arange(n_angular) + 0.5) / n_angular
    P = np.stack([np.outer(rho, np.cos(th)).ravel(), np.outer(rho, np.sin(th)).ravel()], -1)
    W = np.outer(wrho, np.full(n_angular, 2 * np.pi / n_angular)).ravel()

    linf = 0.0
    total = 0.0
    gmax = 0.0
    for c in centres:
        x = c + P
        keep = np.ones(x.shape[0], dtype=bool)
        for k, (a, b) in enumerate(omega):
            keep &= (x[:, k] >= a) & (x[:, k] <= b)
        x, wk = x[keep], W[keep]
        if x.size == 0:
            continue
        diff = field(x) - phi(x)
        linf = max(linf, float(np.abs(diff).max()))
        if grad_phi is not None:
            y = (x - c) / r
            gphi = np.asarray(grad_phi(x))
            g = (chi.gradient(y) / r) * (phi(c[None])[..., None] - phi(x)[..., None]) \
                - chi(y)[..., None] * gphi
            gmax = max(gmax, float(np.linalg.norm(gphi, axis=-1).max()))
        else:
            h = 1e-6 * r
            g = np.stack([(field(x + h * e) - phi(x + h * e) - field(x - h * e) + phi(x - h * e)) / (2 * h)
                          for e in np.eye(2)], -1)
            gmax = max(gmax, 1.0)
        total += float(np.sum(wk * np.linalg.norm(g, axis=-1) ** p))
    chi_inf = 1.0
    return CutoffReport(linf, total ** (1.0 / p), p, eps * chi_inf * gmax)
