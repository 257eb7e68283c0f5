"""Clamped fourth-order bending of the limit beams and the resulting
interface law.

In the limit each beam (rescaled to ``X3 in (0, 1)``) solves::

    D * U'''' = F,   U(0) = u-,  U(1) = u+,  U'(0) = U'(1) = 0,

with ``D = pi kappa0^4 E / (4 kappa1^3)``.  The solution splits into the
Hermite cubic carrying the end values and a Green's-function part with
homogeneous data.  Eliminating the beam from the energy leaves a tangential
spring ``k = 12 D = 3 pi kappa0^4 E / kappa1^3`` between the two blocks and a
load functional ``g = int K * F``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .scaling import LayerScaling, Regime

GAUSS_POINTS = 10


class BendingDomainError(ValueError):
    pass


class NotApplicableError(ValueError):
    """The interface spring is undefined outside the critical regimes."""


def _check_unit(*args):
    for a in args:
        a = np.asarray(a)
        if np.any(a < 0) or np.any(a > 1):
            raise BendingDomainError("arguments must lie in [0, 1]")


def _ramp(X, y, p):
    t = np.asarray(X, dtype=float) - np.asarray(y, dtype=float)
    return np.where(t > 0, t, 0.0) ** p


# ---------------------------------------------------------------------------
# Green's function of d^4/dX^4 with clamped ends
# ---------------------------------------------------------------------------

def green_xi(X3, y3):
    """Factored two-branch form: exact zeros at the clamped ends and exact symmetry."""
    _check_unit(X3, y3)
    X, y = np.asarray(X3, dtype=float), np.asarray(y3, dtype=float)
    lo, hi = np.minimum(X, y), np.maximum(X, y)
    return lo ** 2 * (1 - hi) ** 2 * (3 * hi - lo - 2 * lo * hi) / 6


def green_xi_ramp(X3, y3):
    """The same function written with the Heaviside ramp ``(X - y)_+^3``."""
    _check_unit(X3, y3)
    X, y = np.asarray(X3, dtype=float), np.asarray(y3, dtype=float)
    return (_ramp(X, y, 3) / 6 - (1 - y) ** 2 * (2 * y + 1) * X ** 3 / 6
            + (1 - y) ** 2 * y * X ** 2 / 2)


def green_xi_d1(X3, y3):
    X, y = np.asarray(X3, dtype=float), np.asarray(y3, dtype=float)
    return (_ramp(X, y, 2) / 2 - (1 - y) ** 2 * (2 * y + 1) * X ** 2 / 2
            + (1 - y) ** 2 * y * X)


def green_xi_d2(X3, y3):
    """Second ``X3``-derivative, in the bracket form ``(X-y)H + (1-y)^2 (y - 2yX - X)``."""
    X, y = np.asarray(X3, dtype=float), np.asarray(y3, dtype=float)
    return _ramp(X, y, 1) + (1 - y) ** 2 * (y - 2 * y * X - X)


def green_xi_d2_expanded(X3, y3):
    """Same quantity by direct differentiation of :func:`green_xi` term by term."""
    X, y = np.asarray(X3, dtype=float), np.asarray(y3, dtype=float)
    return _ramp(X, y, 1) - (1 - y) ** 2 * (2 * y + 1) * X + (1 - y) ** 2 * y


def fd_green(y3: float, n: int = 2001) -> tuple[np.ndarray, np.ndarray]:
    """Discrete Green's function: finite-difference solve of
    ``xi'''' = delta(X - y3)`` with clamped ends on ``n`` nodes.

    The point load is lumped onto the two nearest nodes.  Clamping uses
    ghost nodes reflected across each end (``xi_{-1} = xi_1``).
    """
    from scipy.sparse import diags
    from scipy.sparse.linalg import spsolve

    h = 1.0 / (n - 1)
    m = n - 2                               # interior unknowns 1..n-2
    main = np.full(m, 6.0)
    main[0] = main[-1] = 7.0                # ghost reflection adds +1 on the diagonal
    A = diags([np.ones(m - 2), -4 * np.ones(m - 1), main, -4 * np.ones(m - 1),
               np.ones(m - 2)], [-2, -1, 0, 1, 2], format="csc") / h ** 4
    b = np.zeros(m)
    s = y3 / h
    i = int(np.floor(s))
    t = s - i
    for node, wgt in ((i, 1 - t), (i + 1, t)):
        if 1 <= node <= n - 2:
            b[node - 1] += wgt / h
    xi = np.zeros(n)
    xi[1:-1] = spsolve(A, b)
    return np.linspace(0.0, 1.0, n), xi


# ---------------------------------------------------------------------------
# Hermite end-value extension
# ---------------------------------------------------------------------------

def hermite_weight(X):
    """``X^2 (3 - 2X)``: zero value and slope at 0, value 1 and zero slope at 1."""
    X = np.asarray(X, dtype=float)
    return X ** 2 * (3 - 2 * X)


@dataclass(frozen=True)
class HermiteExtension:
    u_minus: np.ndarray
    u_plus: np.ndarray
    plus_sign: float = 1.0

    def __call__(self, X, order: int = 0):
        X = np.asarray(X, dtype=float)[..., None]
        if order == 0:
            a, b = (1 - X) ** 2 * (2 * X + 1), X ** 2 * (3 - 2 * X)
        elif order == 1:
            a, b = 6 * X * (X - 1), 6 * X * (1 - X)
        elif order == 2:
            a, b = 12 * X - 6, 6 - 12 * X
        elif order == 3:
            a, b = 12 + 0 * X, -12 + 0 * X
        else:
            a = b = 0 * X
        return a * self.u_minus + self.plus_sign * b * self.u_plus


def hermite_extension(u_minus, u_plus, flipped_sign: bool = False) -> HermiteExtension:
    """Cubic with end values ``u-``/``u+`` and zero end slopes.

    ``flipped_sign=True`` reproduces the variant with ``-X^2 (3-2X) u+``,
    which fails ``U(1) = u+``; it is kept only for comparison.
    """
    return HermiteExtension(np.atleast_1d(np.asarray(u_minus, dtype=float)),
                            np.atleast_1d(np.asarray(u_plus, dtype=float)),
                            -1.0 if flipped_sign else 1.0)


def hermite_spring_matrix(D: float, flipped_sign: bool = False) -> np.ndarray:
    """Energy ``D int U''^2`` of the Hermite extension as a quadratic form in
    ``(u-, u+)``, by Gauss quadrature."""
    t, w = np.polynomial.legendre.leggauss(4)
    X, w = 0.5 * (t + 1), 0.5 * w
    cols = []
    for um, up in ((1.0, 0.0), (0.0, 1.0)):
        cols.append(hermite_extension(um, up, flipped_sign)(X, 2)[:, 0])
    B = np.column_stack(cols)
    return D * B.T @ (w[:, None] * B)


# ---------------------------------------------------------------------------
# Stiffness constants
# ---------------------------------------------------------------------------

def bending_stiffness(s: LayerScaling, E_m: float) -> float:
    """``D = pi kappa0^4 E_m / (4 kappa1^3)``."""
    return np.pi * s.kappa0 ** 4 * E_m / (4 * s.kappa1 ** 3)


def spring_coefficient(s: LayerScaling, E_m: float) -> float:
    """Tangential interface stiffness ``3 pi kappa0^4 E_m / kappa1^3``."""
    if not s.regime.critical:
        raise NotApplicableError(
            f"regime {s.regime.value}: the blocks are perfectly bonded, no spring")
    return 3 * np.pi * s.kappa0 ** 4 * E_m / s.kappa1 ** 3


def spring_coefficient_2d(s: LayerScaling, E_m: float, width_factor: float = 2.0) -> float:
    """Clamped-guided plane beams of width ``width_factor*r`` and height
    ``delta``, one per period: ``12 E I / (delta^3 eps)``."""
    if s.regime is Regime.SUBCRITICAL:
        raise NotApplicableError("no spring in the subcritical regime")
    inertia = (width_factor * s.r) ** 3 / 12
    return 12 * E_m * inertia / (s.delta ** 3 * s.epsilon)


# ---------------------------------------------------------------------------
# Bending solve
# ---------------------------------------------------------------------------

LoadLike = Union[float, np.ndarray, Callable]


def _as_load(F, m):
    if callable(F):
        def f(X):
            v = np.asarray(F(X), dtype=float)
            if v.shape == np.shape(X):
                v = np.repeat(v[..., None], m, axis=-1)
            return v
    else:
        F = np.asarray(F, dtype=float)
        if F.ndim == 0 or F.ndim == 1 and F.size == m:
            const = np.broadcast_to(F, (m,))

            def f(X):
                return np.broadcast_to(const, np.shape(X) + (m,)).astype(float)
        else:
            samples = F.reshape(F.shape[0], -1)
            grid = np.linspace(0.0, 1.0, samples.shape[0])

            def f(X):
                X = np.asarray(X, dtype=float)
                return np.stack([np.interp(X, grid, samples[:, k]) for k in range(samples.shape[1])],
                                axis=-1)
    return f


def _split_quadrature(X: np.ndarray, n: int = GAUSS_POINTS):
    """Gauss nodes/weights on ``[0, X]`` and ``[X, 1]`` for each ``X``."""
    t, w = np.polynomial.legendre.leggauss(n)
    t, w = 0.5 * (t + 1), 0.5 * w
    X = np.asarray(X, dtype=float)[:, None]
    y = np.concatenate([X * t, X + (1 - X) * t], axis=1)
    wy = np.concatenate([X * w, (1 - X) * w], axis=1)
    return y, wy


@dataclass
class BendingSolution:
    grid: np.ndarray
    U: np.ndarray                   # (n, m) deflection per tangential direction
    second_derivative: np.ndarray   # (n, m)
    D: float
    hermite: HermiteExtension
    load: Callable

    def at(self, X, order: int = 0) -> np.ndarray:
        """Evaluate the solution or one of its first two derivatives at ``X``."""
        X = np.atleast_1d(np.asarray(X, dtype=float))
        kernel = {0: green_xi, 1: green_xi_d1, 2: green_xi_d2}[order]
        y, wy = _split_quadrature(X)
        Xr = np.broadcast_to(X[:, None], y.shape)
        part = np.einsum("ij,ij,ijk->ik", wy, kernel(Xr, y), self.load(y)) / self.D
        return self.hermite(X, order) + part

    @property
    def U_alpha(self) -> np.ndarray:
        return self.U

    def energy(self) -> float:
        """``D int sum_alpha |U''|^2``."""
        t, w = np.polynomial.legendre.leggauss(24)
        X, w = 0.5 * (t + 1), 0.5 * w
        return float(self.D * np.einsum("i,ik->", w, self.at(X, 2) ** 2))

    def to_csv(self, path) -> Path:
        path = Path(path)
        m = self.U.shape[1]
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["X3"] + [f"U{a + 1}" for a in range(m)]
                        + [f"curvature{a + 1}" for a in range(m)])
            for k, X in enumerate(self.grid):
                wr.writerow([repr(float(v)) for v in (X, *self.U[k], *self.second_derivative[k])])
        return path


def solve_bending(F_tilde: LoadLike, u_minus, u_plus, n: int = 201, D: float = np.pi / 4) -> BendingSolution:
    """Clamped beam under ``F_tilde`` with end displacements ``u-``, ``u+``.

    ``F_tilde`` may be a constant, an array of ``m`` constants, samples on a
    uniform grid of ``[0, 1]`` (linearly interpolated) or a callable of
    ``X3``.  ``D`` is the bending prefactor (``pi/4`` for unit constants).
    """
    if n < 5:
        raise ValueError("need at least 5 axial samples")
    herm = hermite_extension(u_minus, u_plus)
    m = herm.u_minus.size
    load = _as_load(F_tilde, m)
    grid = np.linspace(0.0, 1.0, n)
    if not np.all(np.isfinite(load(grid))):
        raise ValueError("bending load is not finite")
    sol = BendingSolution(grid, np.empty((n, m)), np.empty((n, m)), float(D), herm, load)
    sol.U = sol.at(grid, 0)
    sol.second_derivative = sol.at(grid, 2)
    return sol


def weak_form_residual(sol: BendingSolution, n_basis: int = 50) -> float:
    """Largest relative residual of ``D int U'' phi'' = int F phi`` over a
    cubic B-spline basis of ``H^2_0(0, 1)``."""
    from scipy.interpolate import BSpline

    k = 3
    n_all = n_basis + 4
    n_inner = n_all - k - 1
    breaks = np.linspace(0.0, 1.0, n_inner + 2)
    knots = np.concatenate([[0.0] * k, breaks, [1.0] * k])
    t, w = np.polynomial.legendre.leggauss(8)
    a, b = breaks[:-1, None], breaks[1:, None]
    X = (a + 0.5 * (b - a) * (t + 1)).ravel()
    W = (0.5 * (b - a) * w).ravel()
    U2 = sol.at(X, 2)
    F = sol.load(X)
    lhs, rhs, scale = [], [], []
    for j in range(2, n_all - 2):           # drop the two end functions on each side
        c = np.zeros(n_all)
        c[j] = 1.0
        spl = BSpline(knots, c, k)
        phi, phi2 = spl(X), spl.derivative(2)(X)
        lhs.append(sol.D * np.einsum("i,ik,i->k", W, U2, phi2))
        rhs.append(np.einsum("i,ik,i->k", W, F, phi))
        # size of the integrands, so that cancelling terms do not shrink the scale
        scale.append(sol.D * np.einsum("i,ik,i->k", W, np.abs(U2), np.abs(phi2))
                     + np.einsum("i,ik,i->k", W, np.abs(F), np.abs(phi)))
    lhs, rhs, scale = np.array(lhs), np.array(rhs), np.array(scale)
    return float(np.abs(lhs - rhs).max() / max(scale.max(), np.finfo(float).tiny))


# ---------------------------------------------------------------------------
# Interface kernel and load
# ---------------------------------------------------------------------------

def kernel_K(X3, y3, flipped_sign: bool = False):
    """Split ``K(X3, y3)`` into the weight of ``delta(X3 - y3)`` and the
    smooth part.

    The smooth part follows the weak-form derivation,
    ``-6 (1 - 2 X3) d2xi/dX3^2``; ``flipped_sign=True`` gives the ``+`` form.
    """
    _check_unit(X3, y3)
    X = np.asarray(X3, dtype=float)
    sign = 1.0 if flipped_sign else -1.0
    return hermite_weight(X), sign * 6 * (1 - 2 * X) * green_xi_d2(X, y3)


def interface_load_terms(F_tilde: LoadLike, n: int = 64, flipped_sign: bool = False):
    """``(delta_term, smooth_term)`` of ``int_0^1 int_0^1 K(X, y) F(y) dy dX``."""
    load = _as_load(F_tilde, 1)
    t, w = np.polynomial.legendre.leggauss(n)
    X, wX = 0.5 * (t + 1), 0.5 * w
    delta_term = float(np.sum(wX * hermite_weight(X) * load(X)[:, 0]))
    y, wy = _split_quadrature(X)
    Xr = np.broadcast_to(X[:, None], y.shape)
    sign = 1.0 if flipped_sign else -1.0
    smooth = sign * 6 * (1 - 2 * Xr) * green_xi_d2(Xr, y)
    smooth_term = float(np.sum(wX[:, None] * wy * smooth * load(y)[..., 0]))
    return delta_term, smooth_term


def interface_load_rule(n: int = 64, flipped_sign: bool = False):
    """Points and weights with ``g = sum(w * F_tilde(points))``."""
    t, w = np.polynomial.legendre.leggauss(n)
    X, wX = 0.5 * (t + 1), 0.5 * w
    y, wy = _split_quadrature(X)
    Xr = np.broadcast_to(X[:, None], y.shape)
    sign = 1.0 if flipped_sign else -1.0
    smooth = sign * 6 * (1 - 2 * Xr) * green_xi_d2(Xr, y)
    pts = np.concatenate([X, y.ravel()])
    wts = np.concatenate([wX * hermite_weight(X), (wX[:, None] * wy * smooth).ravel()])
    return pts, wts


def interface_load(F_tilde: LoadLike, n: int = 64) -> float:
    """Tangential interface load ``g = int_0^1 (K * F)(X) dX``."""
    return float(sum(interface_load_terms(F_tilde, n)))


def kernel_sign_report() -> dict:
    """Describe the two signs of the smooth kernel part and their effect."""
    rng = np.random.default_rng(7)
    X, y = rng.random(2000), rng.random(2000)
    _, deriv = kernel_K(X, y)
    _, flipped = kernel_K(X, y, flipped_sign=True)
    loads = {"uniform": 1.0, "linear": lambda s: s, "cubic": lambda s: s ** 3 - 0.2 * s}
    g = {name: {"derivation": interface_load_terms(f)[1],
                "flipped": interface_load_terms(f, flipped_sign=True)[1]}
         for name, f in loads.items()}
    return {
        "derivation_form": "-6(1-2X3) d2xi/dX3^2",
        "flipped_form": "+6(1-2X3) d2xi/dX3^2",
        "pointwise_max_difference": float(np.abs(deriv - flipped).max()),
        "smooth_term_of_g": g,
        "note": ("int_0^1 (1-2X3) d2xi/dX3^2 dX3 = 0 because xi(., y3) is in H^2_0; "
                 "the interface load g is identical for both signs"),
    }


# ---------------------------------------------------------------------------
# Limit beam stress and axial contract
# ---------------------------------------------------------------------------

def limit_beam_stress(sol: BendingSolution, E_m: float, X1, X2=0.0) -> np.ndarray:
    """Axial stress ``Theta33 = -E (X1 U1'' + X2 U2'')`` on the solution grid;
    every other component of the limit beam stress vanishes."""
    c = sol.second_derivative
    out = X1 * c[:, 0]
    if c.shape[1] > 1:
        out = out + X2 * c[:, 1]
    return -E_m * out


def limit_axial_profile(u3_trace, X) -> np.ndarray:
    """Axial displacement in the limit layer: constant across the thickness
    and equal to the common normal trace (no stretch, no torsion)."""
    X = np.asarray(X, dtype=float)
    return np.broadcast_to(np.asarray(u3_trace, dtype=float)[..., None],
                           np.shape(u3_trace) + X.shape).copy()
