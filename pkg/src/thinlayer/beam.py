"""Decomposition of a beam displacement into mean-line motion, section
rotation and warping.

For a beam ``D_r x (0, d)`` the displacement is split as::

    u = U(x3) + R(x3) ^ (x1 e1 + x2 e2) + ubar

with ``U`` the section mean of ``u``, ``R`` chosen from the first moments of
``u`` over the section, and ``ubar`` the warping.  The integrals over the
disc use a polar Gauss-Legendre x trapezoid rule; axial derivatives are
central differences on the (uniform) axial grid.

The plane-strain analogue (section ``(-r, r)``, one rotation) is provided by
:func:`decompose_2d`; there the rotation is normalised by ``int x1^2 = 2 r^3/3``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Callable, Optional

import numpy as np


class ResolutionError(ValueError):
    pass


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class SectionQuadrature:
    """Quadrature on the disc ``D_r`` (or the interval ``(-r, r)`` when
    ``nodes`` has a single column)."""

    nodes: np.ndarray
    weights: np.ndarray
    r: float

    @property
    def area(self) -> float:
        return float(self.weights.sum())

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]


def section_quadrature(r: float, n_radial: int = 4, n_angular: int = 16) -> SectionQuadrature:
    """Polar tensor rule on ``D_r``, exact for polynomials of total degree
    ``<= min(2*n_radial - 2, n_angular - 1)``."""
    t, w = np.polynomial.legendre.leggauss(n_radial)
    rho = 0.5 * r * (t + 1.0)
    w_rho = 0.5 * r * w * rho
    theta = 2 * np.pi * np.arange(n_angular) / n_angular
    R, T = np.meshgrid(rho, theta, indexing="ij")
    W = np.outer(w_rho, np.full(n_angular, 2 * np.pi / n_angular))
    nodes = np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])
    return SectionQuadrature(nodes, W.ravel(), float(r))


def interval_quadrature(r: float, n: int = 4) -> SectionQuadrature:
    t, w = np.polynomial.legendre.leggauss(n)
    return SectionQuadrature((r * t)[:, None], r * w, float(r))


# ---------------------------------------------------------------------------
# Sampled beam fields
# ---------------------------------------------------------------------------

@dataclass
class BeamSample:
    """Displacement sampled at ``quad`` nodes on every axial station ``z``.

    ``values[k, q, i]`` is ``u_i`` at ``(nodes[q], z[k])`` and
    ``grad[k, q, i, j] = du_i/dx_j``.
    """

    quad: SectionQuadrature
    z: np.ndarray
    values: np.ndarray
    grad: Optional[np.ndarray] = None
    d: Optional[float] = None

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        nd = self.quad.dim + 1
        if self.values.shape != (self.z.size, self.quad.nodes.shape[0], nd):
            raise ShapeError(f"values shape {self.values.shape} does not match "
                             f"({self.z.size}, {self.quad.nodes.shape[0]}, {nd})")
        if self.grad is not None and self.grad.shape != self.values.shape + (nd,):
            raise ShapeError(f"grad shape {self.grad.shape} inconsistent with values")
        if self.d is None:
            self.d = float(self.z[-1])

    def points(self) -> np.ndarray:
        nq = self.quad.nodes.shape[0]
        xp = np.broadcast_to(self.quad.nodes, (self.z.size, nq, self.quad.dim))
        zz = np.broadcast_to(self.z[:, None, None], (self.z.size, nq, 1))
        return np.concatenate([xp, zz], axis=-1)


def sample_beam(func: Callable, quad: SectionQuadrature, z, jac: Optional[Callable] = None,
                d: Optional[float] = None, h: Optional[float] = None) -> BeamSample:
    """Sample ``func`` (and its Jacobian) on the beam grid.

    Without ``jac`` the gradient is taken by central differences of step
    ``h`` (default ``1e-5 * r``).
    """
    z = np.asarray(z, dtype=float)
    sample = BeamSample(quad, z, np.zeros((z.size, quad.nodes.shape[0], quad.dim + 1)), d=d)
    pts = sample.points()
    sample.values = np.asarray(func(pts), dtype=float)
    if jac is not None:
        sample.grad = np.asarray(jac(pts), dtype=float)
    else:
        h = 1e-5 * quad.r if h is None else h
        nd = quad.dim + 1
        cols = []
        for j in range(nd):
            e = np.zeros(nd)
            e[j] = h
            cols.append((np.asarray(func(pts + e)) - np.asarray(func(pts - e))) / (2 * h))
        sample.grad = np.stack(cols, axis=-1)
    return sample


# ---------------------------------------------------------------------------
# Decomposition
# ---------------------------------------------------------------------------

def _cross_section(R: np.ndarray, xp: np.ndarray) -> np.ndarray:
    """``R ^ (x1, x2, 0)`` for ``R`` of shape (n3, 3) and nodes (nq, 2)."""
    x1 = xp[None, :, 0]
    x2 = xp[None, :, 1]
    R1, R2, R3 = (R[:, None, k] for k in range(3))
    return np.stack([-R3 * x2, R3 * x1, R1 * x2 - R2 * x1], axis=-1)


@dataclass
class BeamFrame:
    """Mean-line displacement ``U`` and section rotation ``R`` per axial station.

    ``dU``/``dR`` hold exact axial derivatives when they were obtained by
    decomposing ``du/dx3``; otherwise they are ``None`` and finite
    differences are used.
    """

    z: np.ndarray
    U: np.ndarray
    R: np.ndarray
    r: float
    d: float
    dU: Optional[np.ndarray] = None
    dR: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.U.shape[0] != self.z.size or self.R.shape[0] != self.z.size:
            raise ShapeError("U and R must share the axial grid")

    def axial_derivatives(self) -> tuple[np.ndarray, np.ndarray]:
        if self.dU is not None and self.dR is not None:
            return self.dU, self.dR
        if self.z.size < 3:
            raise ResolutionError("at least 3 axial samples are needed for derivatives")
        return (np.gradient(self.U, self.z, axis=0, edge_order=2),
                np.gradient(self.R, self.z, axis=0, edge_order=2))

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x3", "U1", "U2", "U3", "R1", "R2", "R3"])
            for k in range(self.z.size):
                w.writerow([repr(float(v)) for v in (self.z[k], *self.U[k], *self.R[k])])
        return path


def _moments(values: np.ndarray, quad: SectionQuadrature):
    if quad.dim != 2:
        raise ShapeError("3D decomposition needs a disc quadrature")
    r = quad.r
    w = quad.weights
    x1, x2 = quad.nodes[:, 0], quad.nodes[:, 1]
    U = np.einsum("q,kqi->ki", w, values) / (np.pi * r ** 2)
    R = np.empty_like(U)
    R[:, 2] = 2 / (np.pi * r ** 4) * np.einsum("q,kq->k", w, x1 * values[..., 1] - x2 * values[..., 0])
    R[:, 0] = 4 / (np.pi * r ** 4) * np.einsum("q,kq->k", w * x2, values[..., 2])
    R[:, 1] = -4 / (np.pi * r ** 4) * np.einsum("q,kq->k", w * x1, values[..., 2])
    return U, R


def decompose(sample: BeamSample) -> BeamFrame:
    """Mean-line displacement and section rotation of a sampled 3D beam field."""
    U, R = _moments(sample.values, sample.quad)
    dU = dR = None
    if sample.grad is not None:
        dU, dR = _moments(sample.grad[..., 2], sample.quad)
    return BeamFrame(sample.z.copy(), U, R, sample.quad.r, float(sample.d), dU, dR)


def elementary_displacement(frame: BeamFrame, x) -> np.ndarray:
    """``U(x3) + R(x3) ^ (x1 e1 + x2 e2)``, linearly interpolated in ``x3``."""
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, 3)
    z = flat[:, 2]
    if np.any(z < frame.z[0] - 1e-14 * frame.d) or np.any(z > frame.z[-1] + 1e-14 * frame.d):
        raise ValueError("x3 outside the sampled axial range")
    U = np.column_stack([np.interp(z, frame.z, frame.U[:, i]) for i in range(3)])
    R = np.column_stack([np.interp(z, frame.z, frame.R[:, i]) for i in range(3)])
    rot = np.column_stack([-R[:, 2] * flat[:, 1], R[:, 2] * flat[:, 0],
                           R[:, 0] * flat[:, 1] - R[:, 1] * flat[:, 0]])
    return (U + rot).reshape(x.shape)


def elementary_on_grid(frame: BeamFrame, quad: SectionQuadrature) -> np.ndarray:
    return frame.U[:, None, :] + _cross_section(frame.R, quad.nodes)


def warping(sample: BeamSample, frame: BeamFrame) -> np.ndarray:
    if frame.z.size != sample.z.size:
        raise ShapeError("frame and sample use different axial grids")
    return sample.values - elementary_on_grid(frame, sample.quad)


def elementary_gradient(frame: BeamFrame, quad: SectionQuadrature) -> np.ndarray:
    """``grad(U_e)[k, q, i, j]`` on the sample grid."""
    dU, dR = frame.axial_derivatives()
    n3, nq = frame.z.size, quad.nodes.shape[0]
    g = np.zeros((n3, nq, 3, 3))
    R = frame.R
    # d/dx1 of R ^ (x1, x2, 0) is R ^ e1 = (0, R3, -R2); d/dx2 is R ^ e2 = (-R3, 0, R1)
    g[..., 0] = np.stack([np.zeros(n3), R[:, 2], -R[:, 1]], axis=-1)[:, None, :]
    g[..., 1] = np.stack([-R[:, 2], np.zeros(n3), R[:, 0]], axis=-1)[:, None, :]
    g[..., 2] = dU[:, None, :] + _cross_section(dR, quad.nodes)
    return g


def warping_gradient(sample: BeamSample, frame: BeamFrame) -> np.ndarray:
    if sample.grad is None:
        raise ShapeError("sample carries no gradient")
    return sample.grad - elementary_gradient(frame, sample.quad)


@dataclass(frozen=True)
class MomentResiduals:
    mean: np.ndarray      # (n3, 3): int ubar
    twist: np.ndarray     # (n3,):   int x1 ubar2 - x2 ubar1
    bending: np.ndarray   # (n3, 2): int x1 ubar3, int x2 ubar3

    def max_abs(self) -> float:
        return float(max(np.abs(self.mean).max(), np.abs(self.twist).max(),
                         np.abs(self.bending).max()))


def check_moments(warp: np.ndarray, quad: SectionQuadrature) -> MomentResiduals:
    """Section integrals that vanish for any warping field."""
    w = quad.weights
    x1, x2 = quad.nodes[:, 0], quad.nodes[:, 1]
    return MomentResiduals(
        np.einsum("q,kqi->ki", w, warp),
        np.einsum("q,kq->k", w, x1 * warp[..., 1] - x2 * warp[..., 0]),
        np.stack([np.einsum("q,kq->k", w * x1, warp[..., 2]),
                  np.einsum("q,kq->k", w * x2, warp[..., 2])], axis=-1),
    )


# ---------------------------------------------------------------------------
# Seminorms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BeamSeminorms:
    warp_L2: float
    warp_gradL2: float
    dR_L2: float
    dU_minus_Rxe3_L2: float
    strain_L2: float


def _axial_integral(f: np.ndarray, z: np.ndarray) -> float:
    return float(np.trapezoid(f, z))


def seminorms(sample: BeamSample, frame: BeamFrame) -> BeamSeminorms:
    """The five norms controlled by the beam Korn-type estimates."""
    if sample.z.size < 3:
        raise ResolutionError("at least 3 axial samples are needed")
    if sample.grad is None:
        raise ShapeError("seminorms need the sampled gradient")
    quad = sample.quad
    fd = BeamFrame(frame.z, frame.U, frame.R, frame.r, frame.d)   # force FD derivatives
    dU, dR = fd.axial_derivatives()
    warp = warping(sample, frame)
    gwarp = sample.grad - elementary_gradient(fd, quad)
    strain = 0.5 * (sample.grad + np.swapaxes(sample.grad, -1, -2))

    def vol_norm(a):
        per_station = np.einsum("q,kq->k", quad.weights,
                                (a ** 2).reshape(a.shape[0], a.shape[1], -1).sum(-1))
        return math.sqrt(max(_axial_integral(per_station, sample.z), 0.0))

    rxe3 = np.column_stack([frame.R[:, 1], -frame.R[:, 0], np.zeros(frame.z.size)])
    return BeamSeminorms(
        warp_L2=vol_norm(warp),
        warp_gradL2=vol_norm(gwarp),
        dR_L2=math.sqrt(_axial_integral((dR ** 2).sum(1), sample.z)),
        dU_minus_Rxe3_L2=math.sqrt(_axial_integral(((dU - rxe3) ** 2).sum(1), sample.z)),
        strain_L2=vol_norm(strain),
    )


# ---------------------------------------------------------------------------
# Plane-strain analogue
# ---------------------------------------------------------------------------

@dataclass
class BeamFrame2D:
    z: np.ndarray
    U: np.ndarray       # (n, 2): transverse, axial
    R: np.ndarray       # (n,)
    r: float
    d: float


def decompose_2d(values: np.ndarray, quad: SectionQuadrature, z) -> tuple[BeamFrame2D, np.ndarray]:
    """Decompose a plane beam field sampled on ``(-r, r) x z``.

    Returns the frame and the warping; the elementary part is
    ``(U1, U2 - R x1)``.
    """
    if quad.dim != 1:
        raise ShapeError("decompose_2d needs an interval quadrature")
    z = np.asarray(z, dtype=float)
    r, w, x1 = quad.r, quad.weights, quad.nodes[:, 0]
    U = np.einsum("q,kqi->ki", w, values) / (2 * r)
    R = -np.einsum("q,kq->k", w * x1, values[..., 1]) / (2 * r ** 3 / 3)
    ue = np.stack([np.broadcast_to(U[:, None, 0], values.shape[:2]),
                   U[:, None, 1] - R[:, None] * x1[None, :]], axis=-1)
    return BeamFrame2D(z, U, R, r, float(z[-1])), values - ue


# ---------------------------------------------------------------------------
# Polynomial test fields
# ---------------------------------------------------------------------------

class PolynomialField:
    """Vector polynomial ``u_i = sum c[i, a, b, c] (x1/r)^a (x2/r)^b (x3/d)^c``
    of total degree <= ``degree``, with exact Jacobian."""

    def __init__(self, coeffs: dict, r: float, d: float):
        self.coeffs = coeffs
        self.r, self.d = float(r), float(d)

    @classmethod
    def random(cls, rng: np.random.Generator, r: float, d: float, degree: int = 3):
        exps = [e for e in product(range(degree + 1), repeat=3) if sum(e) <= degree]
        return cls({e: rng.standard_normal(3) for e in exps}, r, d)

    def _scaled(self, x):
        x = np.asarray(x, dtype=float)
        return x[..., 0] / self.r, x[..., 1] / self.r, x[..., 2] / self.d

    def __call__(self, x):
        X1, X2, X3 = self._scaled(x)
        out = np.zeros(np.shape(X1) + (3,))
        for (a, b, c), v in self.coeffs.items():
            out += (X1 ** a * X2 ** b * X3 ** c)[..., None] * v
        return out

    def jacobian(self, x):
        X1, X2, X3 = self._scaled(x)
        out = np.zeros(np.shape(X1) + (3, 3))
        scale = (self.r, self.r, self.d)
        for (a, b, c), v in self.coeffs.items():
            parts = (
                a * X1 ** max(a - 1, 0) * X2 ** b * X3 ** c if a else 0 * X1,
                b * X1 ** a * X2 ** max(b - 1, 0) * X3 ** c if b else 0 * X1,
                c * X1 ** a * X2 ** b * X3 ** max(c - 1, 0) if c else 0 * X1,
            )
            for j in range(3):
                out[..., :, j] += (parts[j] / scale[j])[..., None] * v
        return out
