import numpy as np
import pytest

from thinlayer.fem2d import (BEAM, DisplacementField, EmptyLayerError, JacobianError, MeshError, MeshResolution,
                             ResolutionError, SolverError, assemble, build_mesh, energy,
                             recover_stress, solve, stiffness, structured_mesh, trace_jump, trace_l2,
                             write_trace_csv, write_vtk)
from thinlayer.fem2d.assembly import solve_system
from thinlayer.fem2d.mesh import graded_segment
from thinlayer.fem2d.post import von_mises
from thinlayer.scaling import Domain, LoadSpec, MaterialParams, PenetrationError, derive_geometry

from support import all_dofs, mms_error, patch_error

MAT = MaterialParams.from_young_poisson(2e11, 0.3)
S = derive_geometry(0.1, 1, 1, 1.5, 4 / 3)
LOAD = LoadSpec.constant([1e3, 1e3])


@pytest.fixture(scope="module")
def fine():
    mesh = build_mesh(S)
    sys_ = assemble(mesh, MAT, MAT, LOAD, S)
    return mesh, sys_, solve(sys_)


class TestMesh:
    def test_beam_count(self, fine):
        mesh = fine[0]
        assert len(mesh.beam_centres) == 9
        np.testing.assert_allclose(mesh.beam_centres, 0.1 * np.arange(1, 10))
        assert np.sum(mesh.tag == BEAM) == 9 * 4 * 8

    def test_quality(self, fine):
        mesh = fine[0]
        assert np.all(mesh.jacobians() > 0)
        assert mesh.summary()["max_aspect"] >= 1.0
        sizes = np.diff(mesh.ys)
        assert np.all(sizes[1:] / sizes[:-1] <= 1.5 + 1e-9)
        assert np.all(sizes[:-1] / sizes[1:] <= 1.5 + 1e-9)

    def test_void_between_beams(self, fine):
        mesh = fine[0]
        layer = mesh.region == 0
        assert np.all(mesh.tag[layer] == BEAM)
        X = mesh.nodes[mesh.elems[layer]].mean(1)[:, 0]
        off = np.abs(X - 0.1 * np.round(X / 0.1))
        assert off.max() < S.r

    def test_empty_layer(self):
        with pytest.raises(EmptyLayerError):
            build_mesh(S, domain=Domain(((0.0, 0.05),), 1.0))

    def test_resolution(self):
        with pytest.raises(ResolutionError):
            build_mesh(S, MeshResolution(n_beam_x=1))

    def test_too_wide(self):
        with pytest.raises(PenetrationError):
            build_mesh(S, MeshResolution(width_factor=4.0))

    def test_clamp_options(self):
        base = build_mesh(S)
        sides = build_mesh(S, MeshResolution(clamp="bottom+sides"))
        x, y = sides.nodes[sides.gamma].T
        assert np.all(base.nodes[base.gamma, 1] == -1.0)
        assert np.all((y == -1.0) | ((y < 0) & ((x == 0.0) | (x == 1.0))))
        assert sides.gamma.size == base.gamma.size + 2 * (np.sum(sides.ys < 0) - 1)
        with pytest.raises(MeshError):
            MeshResolution(clamp="top")

    def test_graded_segment(self):
        p = graded_segment(0.0, 1.0, 0.01, 0.01, 0.2, 1.5)
        h = np.diff(p)
        assert p[0] == 0 and p[-1] == 1 and h.max() <= 0.2 + 1e-12
        assert np.all(h[1:] / h[:-1] <= 1.5 + 1e-9) and np.all(h[:-1] / h[1:] <= 1.5 + 1e-9)

    def test_inverted_element(self):
        m = structured_mesh([0.0, 1.0], [0.0, 1.0])
        m.elems = m.elems[:, ::-1]
        with pytest.raises(JacobianError):
            stiffness(m, {0: MAT})


class TestAssembly:
    def test_zero_load(self, fine):
        mesh = fine[0]
        sys0 = assemble(mesh, MAT, MAT, LoadSpec.constant([0.0, 0.0]), S)
        assert np.all(sys0.rhs == 0)
        u = solve(sys0)
        assert np.all(u.values == 0)

    def test_single_element_null_space(self):
        m = structured_mesh([0.0, 1.0], [0.0, 1.0])
        K = stiffness(m, {0: MAT}).toarray()
        x, y = m.nodes.T
        for mode in (np.tile([1, 0], 4), np.tile([0, 1], 4), np.column_stack([-y, x]).ravel()):
            assert np.abs(K @ mode).max() < 1e-4 * np.abs(K).max()
        assert np.abs(K[:, 0::2].sum(1)).max() < 1e-5 * np.abs(K).max()

    def test_nullity_and_symmetry(self):
        m = structured_mesh(np.linspace(0, 1, 4), [0.0, 0.3, 0.5, 1.0])
        K = stiffness(m, {0: MAT}).toarray()
        assert np.abs(K - K.T).max() <= 1e-12 * np.abs(K).max()
        ev = np.linalg.eigvalsh(K)
        assert np.sum(ev < 1e-10 * ev.max()) == 3
        assert ev.min() > -1e-10 * ev.max()
        free = np.setdiff1d(np.arange(K.shape[0]), all_dofs(np.flatnonzero(m.nodes[:, 1] == 0)))
        assert np.linalg.eigvalsh(K[np.ix_(free, free)]).min() > 0

    def test_load_sum(self, fine):
        mesh, sys_, _ = fine
        # lower block + upper block: (0,1)x(-1,0) U (0,1)x(delta,1)
        area = 1.0 + (1.0 - S.delta)
        np.testing.assert_allclose(sys_.rhs[0::2].sum(), 1e3 * area, rtol=1e-12)
        np.testing.assert_allclose(sys_.rhs[1::2].sum(), 1e3 * area, rtol=1e-12)

    def test_beam_load(self):
        mesh = build_mesh(S)
        load = LoadSpec.constant([0.0, 0.0], [2.0, -1.0])
        f = assemble(mesh, MAT, MAT, load, S).rhs
        # one beam carries eps^(n-1) * int_{B1} F = eps * 2 * F over (-1,1)x(0,1)
        np.testing.assert_allclose([f[0::2].sum(), f[1::2].sum()], [9 * 0.1 * 2 * 2.0, -9 * 0.1 * 2 * 1.0],
                                   rtol=1e-12)

    def test_energy_identity(self, fine):
        _, sys_, u = fine
        uKu, fu = energy(sys_, u)
        assert uKu == pytest.approx(fu, rel=1e-9)
        assert u.residual <= 1e-9
        assert np.all(u.values[fine[0].gamma] == 0)


class TestSolver:
    def test_patch(self):
        assert patch_error() <= 1e-10

    def test_manufactured_rate(self):
        errs = np.array([mms_error(n) for n in (8, 16, 32, 64)])
        rates = np.log2(errs[:-1] / errs[1:])
        assert np.all(rates >= 1.9), rates

    def test_cg_path(self, fine):
        _, sys_, u = fine
        u2, rel, method = solve_system(sys_, tol=1e-9, method="cg")
        assert method == "cg" and rel <= 1e-9
        np.testing.assert_allclose(u2, u.flat, atol=1e-6 * np.abs(u.flat).max())

    def test_non_convergence(self, fine):
        with pytest.raises(SolverError) as exc:
            solve_system(fine[1], method="cg", maxiter=2)
        assert exc.value.history

    def test_unknown_method(self, fine):
        with pytest.raises(ValueError):
            solve_system(fine[1], method="magic")


class TestPost:
    def square(self):
        return structured_mesh([0.0, 0.5, 1.0], [0.0, 1.0])

    def test_rigid_translation(self):
        m = self.square()
        u = DisplacementField(np.tile([0.3, -0.2], (m.n_nodes, 1)), m)
        st = recover_stress(u, MAT)
        assert np.abs(st.sigma).max() < 1e-3 and np.abs(st.von_mises).max() < 1e-3

    def test_uniaxial(self):
        m = self.square()
        s = 1e-4
        u = DisplacementField(np.column_stack([s * m.nodes[:, 0], 0 * m.nodes[:, 1]]), m)
        st = recover_stress(u, MAT)
        np.testing.assert_allclose(st.sigma[:, 0], (MAT.lam + 2 * MAT.mu) * s, rtol=1e-12)
        np.testing.assert_allclose(st.sigma[:, 1], MAT.lam * s, rtol=1e-12)
        np.testing.assert_allclose(st.sigma33, 0.3 * (MAT.lam + 2 * MAT.mu + MAT.lam) * s, rtol=1e-12)

    def test_von_mises_hand(self):
        assert von_mises(100.0, 0.0, 0.0, 30.0) == pytest.approx(np.sqrt(7900.0))
        assert von_mises(0.0, 0.0, 10.0, 0.0) == pytest.approx(10 * np.sqrt(3))
        assert von_mises(5.0, 5.0, 0.0, 5.0) == 0.0

    def test_trace_zero(self, fine):
        mesh = fine[0]
        tr = trace_jump(DisplacementField(np.zeros((mesh.n_nodes, 2)), mesh), MAT)
        assert np.all(tr.jump == 0) and np.all(tr.traction == 0)

    def test_trace_norm_oracle(self):
        x = np.sort(np.concatenate([[0.0, 1.0], np.random.default_rng(2).random(40)]))
        f = 1 + 3 * x - 2 * x ** 3
        t, w = np.polynomial.legendre.leggauss(6)
        dense = 0.0
        for a, b in zip(x[:-1], x[1:]):
            xx = 0.5 * (b - a) * (t + 1) + a
            dense += np.sum(0.5 * (b - a) * w * np.interp(xx, x, f) ** 2)
        assert trace_l2(x, f) == pytest.approx(np.sqrt(dense), rel=1e-10)

    def test_bonded_jump_is_smooth_increment(self):
        # with the layer filled by bulk material the trace difference is just
        # delta times the normal derivative of a continuous field
        filled = build_mesh(S, fill_layer=True)
        uf = solve(assemble(filled, MAT, MAT, LOAD, S))
        jf = trace_jump(uf, MAT).jump
        j0 = int(np.argmin(np.abs(filled.ys)))
        below = filled.grid_id[:, j0 - 1]
        h = filled.ys[j0] - filled.ys[j0 - 1]
        slope = (uf.values[filled.sigma] - uf.values[below]) / h
        np.testing.assert_allclose(jf, S.delta * slope, rtol=0.1, atol=0.1 * np.abs(jf).max())

    def test_misaligned_trace(self, fine):
        mesh = build_mesh(S)
        mesh.sigma_plus = mesh.sigma_plus[:-1]
        with pytest.raises(MeshError):
            trace_jump(DisplacementField(np.zeros((mesh.n_nodes, 2)), mesh), MAT)

    def test_export(self, fine, tmp_path):
        mesh, _, u = fine
        st = recover_stress(u, MAT)
        text = write_vtk(tmp_path / "f.vtk", mesh, u, st).read_text().splitlines()
        assert text[0].startswith("# vtk DataFile")
        assert f"POINTS {mesh.n_nodes} double" in text
        assert f"CELLS {mesh.elems.shape[0]} {5 * mesh.elems.shape[0]}" in text
        assert f"POINT_DATA {mesh.n_nodes}" in text
        csv_lines = write_trace_csv(tmp_path / "t.csv", trace_jump(u, MAT)).read_text().splitlines()
        assert csv_lines[0] == "x,jump_u1,jump_u2,sigma12_plus,sigma22_plus"
        assert len(csv_lines) == mesh.sigma.size + 1
