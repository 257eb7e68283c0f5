"""Material constants, layer scaling laws and the scaled load field.

Everything else in the package speaks in terms of the objects defined here:
an isotropic :class:`MaterialParams`, a :class:`LayerScaling` linking the
period ``epsilon`` to the beam radius ``r`` and layer thickness ``delta``,
and a :class:`Domain` describing the two blocks ``omega x (-L, 0)`` and
``omega x (delta, L)``.

The in-plane dimension of ``omega`` is 1 for the plane-strain model and 2
for the three-dimensional formulas; the vertical coordinate is always the
last component of a point.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

EXPONENT_TOL = 1e-12


class ScalingError(ValueError):
    """Parameters outside the supported scaling triangle."""


class PenetrationError(ScalingError):
    """Beams of radius ``r >= epsilon/2`` would overlap."""


class MaterialError(ValueError):
    pass


class DomainError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Materials
# ---------------------------------------------------------------------------

def engineering_constants(lam: float, mu: float) -> tuple[float, float]:
    """Return ``(E, nu)`` for the Lame pair ``(lam, mu)``."""
    if not mu > 0 or not 3 * lam + 2 * mu > 0:
        raise MaterialError(f"inadmissible Lame pair lambda={lam!r}, mu={mu!r}")
    young = mu * (3 * lam + 2 * mu) / (lam + mu)
    poisson = lam / (2 * (lam + mu))
    return young, poisson


def lame_parameters(young: float, poisson: float) -> tuple[float, float]:
    """Inverse of :func:`engineering_constants`."""
    if not young > 0 or not -1.0 < poisson < 0.5:
        raise MaterialError(f"inadmissible (E, nu) = ({young!r}, {poisson!r})")
    lam = young * poisson / ((1 + poisson) * (1 - 2 * poisson))
    mu = young / (2 * (1 + poisson))
    return lam, mu


@dataclass(frozen=True)
class MaterialParams:
    lam: float
    mu: float

    def __post_init__(self):
        if not self.mu > 0 or not 3 * self.lam + 2 * self.mu > 0:
            raise MaterialError(f"inadmissible Lame pair lambda={self.lam!r}, mu={self.mu!r}")
        if self.lam < 0:
            raise MaterialError("negative Poisson ratio materials are not supported")

    @classmethod
    def from_young_poisson(cls, young: float, poisson: float) -> "MaterialParams":
        return cls(*lame_parameters(young, poisson))

    @property
    def young(self) -> float:
        return engineering_constants(self.lam, self.mu)[0]

    @property
    def poisson(self) -> float:
        return engineering_constants(self.lam, self.mu)[1]

    def plane_strain_matrix(self) -> np.ndarray:
        """Voigt matrix mapping ``(e11, e22, 2 e12)`` to ``(s11, s22, s12)``."""
        lam, mu = self.lam, self.mu
        return np.array([[lam + 2 * mu, lam, 0.0],
                         [lam, lam + 2 * mu, 0.0],
                         [0.0, 0.0, mu]])


# ---------------------------------------------------------------------------
# Scaling regimes
# ---------------------------------------------------------------------------

class Regime(enum.Enum):
    CASE_I = "CaseI"
    CASE_II = "CaseII"
    SUBCRITICAL = "Subcritical"

    @property
    def critical(self) -> bool:
        return self is not Regime.SUBCRITICAL


def classify_regime(eta0: float, eta1: float) -> Regime:
    if abs(eta0 - 1.0) <= EXPONENT_TOL and abs(eta1 - 2.0 / 3.0) <= EXPONENT_TOL:
        return Regime.CASE_I
    if (1.0 + EXPONENT_TOL < eta0 < 2.0 - EXPONENT_TOL
            and abs(eta1 - (4 * eta0 - 2) / 3) <= EXPONENT_TOL):
        return Regime.CASE_II
    return Regime.SUBCRITICAL


@dataclass(frozen=True)
class LayerScaling:
    """``r = kappa0 eps**eta0`` and ``delta = kappa1 eps**eta1``; build with
    :func:`derive_geometry`."""

    epsilon: float
    kappa0: float
    kappa1: float
    eta0: float
    eta1: float
    r: float
    delta: float
    regime: Regime
    r_over_delta_max: float = 2.0

    @property
    def critical_ratio(self) -> float:
        """``eps^2 delta^3 / r^4``; bounded away from zero in the critical regimes."""
        return self.epsilon ** 2 * self.delta ** 3 / self.r ** 4

    def with_epsilon(self, epsilon: float) -> "LayerScaling":
        return derive_geometry(epsilon, self.kappa0, self.kappa1, self.eta0, self.eta1,
                               r_over_delta_max=self.r_over_delta_max)


def case_ii_eta1(eta0: float) -> float:
    return (4 * eta0 - 2) / 3


def derive_geometry(epsilon: float, kappa0: float, kappa1: float, eta0: float,
                    eta1: float, r_over_delta_max: float = 2.0) -> LayerScaling:
    if not (epsilon > 0 and kappa0 > 0 and kappa1 > 0):
        raise ScalingError("epsilon, kappa0 and kappa1 must be positive")
    if eta0 < 1.0 - EXPONENT_TOL:
        raise ScalingError(f"eta0={eta0} < 1: beams wider than the period")
    if abs(eta0 - 1.0) <= EXPONENT_TOL and not kappa0 < 0.5:
        raise PenetrationError("eta0 = 1 requires kappa0 < 1/2")
    if eta1 > eta0 + EXPONENT_TOL:
        raise ScalingError(f"eta1={eta1} > eta0={eta0}")
    if 2 + 3 * eta1 - 4 * eta0 < -EXPONENT_TOL:
        raise ScalingError(
            f"(eta0, eta1)=({eta0}, {eta1}) violates 2 + 3 eta1 - 4 eta0 >= 0")
    if abs(eta0 - 2.0) <= EXPONENT_TOL and abs(eta1 - 2.0) <= EXPONENT_TOL:
        raise ScalingError("eta0 = eta1 = 2 describes a perforated layer, not beams")

    r = kappa0 * epsilon ** eta0
    delta = kappa1 * epsilon ** eta1
    if not r < epsilon / 2:
        raise PenetrationError(f"r={r:.6g} >= epsilon/2={epsilon / 2:.6g}")
    if r / delta > r_over_delta_max:
        raise ScalingError(f"r/delta={r / delta:.4g} exceeds {r_over_delta_max}")
    return LayerScaling(epsilon, kappa0, kappa1, eta0, eta1, r, delta,
                        classify_regime(eta0, eta1), r_over_delta_max)


# ---------------------------------------------------------------------------
# Lattice helpers
# ---------------------------------------------------------------------------

def cell_index(t):
    """``[t]_Y``: nearest integer, ties rounded up (centered reference cell)."""
    return np.floor(np.asarray(t, dtype=float) + 0.5)


def cell_offset(t):
    """``{t}_Y = t - [t]_Y``, in ``[-1/2, 1/2)``."""
    t = np.asarray(t, dtype=float)
    return t - cell_index(t)


def interior_indices_1d(lo: float, hi: float, epsilon: float) -> np.ndarray:
    """Integers ``xi`` with ``epsilon*(xi + (-1/2, 1/2))`` inside ``(lo, hi)``."""
    tol = 1e-12
    first = math.ceil(lo / epsilon + 0.5 - tol)
    last = math.floor(hi / epsilon - 0.5 + tol)
    return np.arange(first, last + 1, dtype=int)


@dataclass(frozen=True)
class Domain:
    """``omega`` as a box (one ``(lo, hi)`` pair per in-plane axis) and block height ``L``."""

    omega: tuple = ((0.0, 1.0),)
    L: float = 1.0

    def __post_init__(self):
        omega = tuple((float(a), float(b)) for a, b in self.omega)
        if not omega or any(b <= a for a, b in omega):
            raise DomainError(f"bad omega bounds {self.omega!r}")
        if not self.L > 0:
            raise DomainError("L must be positive")
        object.__setattr__(self, "omega", omega)

    @property
    def plane_dim(self) -> int:
        return len(self.omega)

    @property
    def dim(self) -> int:
        return self.plane_dim + 1

    def inside_omega(self, xp: np.ndarray) -> np.ndarray:
        xp = np.atleast_2d(xp)
        ok = np.ones(xp.shape[0], dtype=bool)
        for k, (a, b) in enumerate(self.omega):
            ok &= (xp[:, k] >= a) & (xp[:, k] <= b)
        return ok

    def beam_centers(self, epsilon: float) -> np.ndarray:
        """Centres ``epsilon*xi`` of all beams, shape ``(n_beams, plane_dim)``."""
        axes = [interior_indices_1d(a, b, epsilon) for a, b in self.omega]
        grids = np.meshgrid(*axes, indexing="ij")
        return epsilon * np.stack([g.ravel() for g in grids], axis=-1).astype(float)


# ---------------------------------------------------------------------------
# Loads
# ---------------------------------------------------------------------------

ForceFunc = Callable[..., np.ndarray]


def _constant(value, n):
    value = np.asarray(value, dtype=float)

    def f(*args):
        shape = np.shape(args[-1])
        if len(args) == 1:
            shape = shape[:-1]
        return np.broadcast_to(value, shape + (n,)).copy()

    return f


@dataclass(frozen=True)
class LoadSpec:
    """Body forces: ``f_bulk(x)`` in the blocks and the rescaled beam density
    ``f_beam(cell_centre, X', X3)`` expressed on the unit beam.

    Both callables are vectorised over leading axes and return arrays whose
    last axis is the space dimension.
    """

    f_bulk: ForceFunc
    f_beam: Optional[ForceFunc] = None
    dim: int = 2
    description: dict = field(default_factory=dict, compare=False)

    @classmethod
    def constant(cls, bulk: Sequence[float], beam: Optional[Sequence[float]] = None) -> "LoadSpec":
        n = len(bulk)
        beam = [0.0] * n if beam is None else beam
        if len(beam) != n:
            raise ValueError("bulk and beam loads must have the same dimension")
        return cls(_constant(bulk, n), _constant(beam, n), n,
                   {"bulk": list(map(float, bulk)), "beam": list(map(float, beam))})

    def beam(self, centre, Xp, X3) -> np.ndarray:
        if self.f_beam is None:
            return np.zeros(np.shape(X3) + (self.dim,))
        return np.asarray(self.f_beam(centre, Xp, X3), dtype=float)


def beam_load_factor(s: LayerScaling, dim: int) -> float:
    """Amplitude ``eps^(n-1) / (r^(n-1) delta)`` of the beam force density."""
    n1 = dim - 1
    return s.epsilon ** n1 / (s.r ** n1 * s.delta)


def locate(s: LayerScaling, x: np.ndarray, domain: Domain):
    """Classify points as ``-1`` (lower block), ``+1`` (upper block) or ``0``
    (beam); raise :class:`DomainError` for points outside the structure.

    Returns ``(region, centres)`` where ``centres`` are the beam-cell centres
    ``eps*[x'/eps]_Y`` (meaningful for beam points only).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != domain.dim:
        raise DomainError(f"points must have {domain.dim} coordinates")
    xp, xv = x[:, :-1], x[:, -1]
    eps = s.epsilon
    centres = eps * cell_index(xp / eps)
    region = np.full(x.shape[0], 2, dtype=int)
    in_w = domain.inside_omega(xp)
    region[in_w & (xv >= -domain.L) & (xv < 0)] = -1
    region[in_w & (xv > s.delta) & (xv <= domain.L)] = 1

    layer = in_w & (xv >= 0) & (xv <= s.delta)
    if np.any(layer):
        off = np.linalg.norm(xp - centres, axis=1)
        interior = np.ones(x.shape[0], dtype=bool)
        for k, (a, b) in enumerate(domain.omega):
            interior &= (centres[:, k] - eps / 2 >= a - 1e-12 * eps) & (
                centres[:, k] + eps / 2 <= b + 1e-12 * eps)
        region[layer & interior & (off <= s.r)] = 0
    if np.any(region == 2):
        bad = x[region == 2][0]
        raise DomainError(f"point {bad} lies outside the structure")
    return region, centres


def scaled_load(load: LoadSpec, s: LayerScaling, x, domain: Domain) -> np.ndarray:
    """Force density ``f_eps(x)``: the bulk force in the blocks and the
    rescaled beam density ``eps^(n-1)/(r^(n-1) delta) F^m`` inside beams."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    region, centres = locate(s, x, domain)
    out = np.zeros_like(x)
    bulk = region != 0
    if np.any(bulk):
        out[bulk] = load.f_bulk(x[bulk])
    beam = ~bulk
    if np.any(beam):
        Xp = (x[beam, :-1] - centres[beam]) / s.r
        X3 = x[beam, -1] / s.delta
        out[beam] = beam_load_factor(s, domain.dim) * load.beam(centres[beam], Xp, X3)
    return out[0] if single else out
