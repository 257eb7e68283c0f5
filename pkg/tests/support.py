"""Oracles shared by the unit tests and the acceptance suite."""
import numpy as np

from thinlayer.beam import PolynomialField, decompose, sample_beam, section_quadrature, seminorms
from thinlayer.fem2d import SparseSystem, solve, stiffness, structured_mesh
from thinlayer.fem2d.assembly import body_load, shape_q1, solve_system
from thinlayer.scaling import MaterialParams
from thinlayer.unfolding import reference_beam_quadrature, unfold_Tprime

STEEL = MaterialParams.from_young_poisson(2e11, 0.3)


def box_quadrature(bounds, n=4):
    t, w = np.polynomial.legendre.leggauss(n)
    pts = [0.5 * (b - a) * (t + 1) + a for a, b in bounds]
    wts = [0.5 * (b - a) * w for a, b in bounds]
    P = np.stack([g.ravel() for g in np.meshgrid(*pts, indexing="ij")], -1)
    W = np.prod(np.stack([g.ravel() for g in np.meshgrid(*wts, indexing="ij")], -1), -1)
    return P, W


def random_cubic(rng, n):
    """Random polynomial of degree <= 3 in ``n`` variables."""
    exps = [e for e in np.ndindex(*(4,) * n) if sum(e) <= 3]
    c = rng.standard_normal(len(exps))

    def f(x):
        x = np.asarray(x, float)
        return sum(ci * np.prod([x[..., k] ** e[k] for k in range(n)], axis=0) for ci, e in zip(c, exps))
    return f


def boundary_nodes(mesh):
    x, y = mesh.nodes.T
    return np.flatnonzero(np.isclose(x, x.min()) | np.isclose(x, x.max())
                          | np.isclose(y, y.min()) | np.isclose(y, y.max()))


def all_dofs(nodes):
    return np.stack([2 * nodes, 2 * nodes + 1], -1).ravel()


def patch_error(mat=STEEL, seed=5):
    """Relative max error of an affine field imposed on a distorted mesh."""
    m = structured_mesh(np.array([0.0, 0.15, 0.4, 0.7, 1.0]), np.array([0.0, 0.3, 0.45, 1.0]))
    rng = np.random.default_rng(seed)
    bn = boundary_nodes(m)
    interior = np.setdiff1d(np.arange(m.n_nodes), bn)
    m.nodes[interior] += rng.uniform(-0.04, 0.04, (interior.size, 2))
    A = np.array([[1e-3, -2e-3], [5e-4, 3e-3]])
    exact = m.nodes @ A.T + np.array([1e-3, -1e-3])
    sys_ = SparseSystem(stiffness(m, {0: mat}), np.zeros(m.n_dofs), np.zeros(0, int), mesh=m)
    sys_ = sys_.with_dirichlet(all_dofs(bn), exact[bn].ravel())
    u, _, _ = solve_system(sys_, tol=1e-12)
    return np.abs(u.reshape(-1, 2) - exact).max() / np.abs(exact).max()


def mms_error(n, mat=STEEL):
    """L2 error for u = (sin(pi x) sin(pi y), 0) on an n x n unit square."""
    m = structured_mesh(np.linspace(0, 1, n + 1), np.linspace(0, 1, n + 1))
    lam, mu = mat.lam, mat.mu
    pi = np.pi

    def force(xq, idx):
        x, y = xq[..., 0], xq[..., 1]
        return np.stack([(lam + 3 * mu) * pi ** 2 * np.sin(pi * x) * np.sin(pi * y),
                         -(lam + mu) * pi ** 2 * np.cos(pi * x) * np.cos(pi * y)], -1)

    sys_ = SparseSystem(stiffness(m, {0: mat}), body_load(m, force), all_dofs(boundary_nodes(m)), mesh=m)
    u = solve(sys_, tol=1e-10)
    t, w = np.polynomial.legendre.leggauss(4)
    xi = np.stack(np.meshgrid(t, t, indexing="ij"), -1).reshape(-1, 2)
    wq = np.outer(w, w).ravel()
    N, _ = shape_q1(xi)
    xq = np.einsum("ga,eai->egi", N, m.nodes[m.elems])
    uh = np.einsum("ga,eai->egi", N, u.values[m.elems])
    ue = np.stack([np.sin(pi * xq[..., 0]) * np.sin(pi * xq[..., 1]), 0 * xq[..., 0]], -1)
    return np.sqrt(np.sum((1 / n) ** 2 / 4 * wq * ((uh - ue) ** 2).sum(-1)))


def korn_ratios(r, n_fields=200):
    """Worst warping and rotation-gradient ratios over random cubic fields on a beam of radius r."""
    d = 10 * r
    quad = section_quadrature(r, 6, 24)
    z = np.linspace(0, d, 41)
    rng = np.random.default_rng(1234)
    warp, rot = [], []
    for _ in range(n_fields):
        f = PolynomialField.random(rng, r, d)
        s = sample_beam(f, quad, z, jac=f.jacobian)
        n = seminorms(s, decompose(s))
        warp.append(n.warp_L2 / n.strain_L2)
        rot.append(n.dR_L2 * r ** 2 / n.strain_L2)
    return max(warp), max(rot)


def tprime_identity(seed, grid, s):
    """Both sides of the unfolding integral identity for a random cubic in (x', X).

    Returns ``(unfolded, physical, scale)`` where ``scale`` is the integral of
    the absolute value, for use as an absolute tolerance reference.
    """
    f5 = random_cubic(np.random.default_rng(seed), 5)
    phi = lambda S, x: f5(np.concatenate([S, x], -1))
    r, delta = s.r, s.delta
    sq, ws = grid.macro_quadrature(3)
    X, wX = reference_beam_quadrature(4, 16, 4)
    lhs = r ** 2 * delta * ws @ unfold_Tprime(phi, grid, r, delta, sq, X).values @ wX
    q = section_quadrature(r, 4, 16)
    t, w = np.polynomial.legendre.leggauss(4)
    z, wz = 0.5 * delta * (t + 1), 0.5 * delta * w
    xb = np.concatenate([np.repeat(q.nodes, z.size, 0), np.tile(z, q.nodes.shape[0])[:, None]], 1)
    wb = np.outer(q.weights, wz).ravel()
    vals = phi(np.broadcast_to(sq[:, None], (sq.shape[0], xb.shape[0], 2)),
               np.broadcast_to(xb, (sq.shape[0],) + xb.shape))
    return lhs, ws @ vals @ wb, ws @ np.abs(vals) @ wb
