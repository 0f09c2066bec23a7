import numpy as np
import pytest

from dppdyn.errors import (
    DimensionMismatchError,
    NotHermitianError,
    NotPositiveDefiniteError,
    ValidationError,
)
from dppdyn.kernel import (
    Kernel,
    KernelSpec,
    SiteSpace,
    build_kernel,
    check_assumption_a,
    load_kernel_matrix,
    restrict_a_bracket,
)

from conftest import random_dd_kernel


class TestSiteSpace:
    def test_plain_space(self):
        space = SiteSpace(5)
        assert space.n_sites == 5
        assert space.torus_sides is None

    def test_torus_coordinates_roundtrip(self):
        space = SiteSpace.torus(3, 4)
        assert space.n_sites == 12
        for i in range(12):
            assert space.index(space.coordinate(i)) == i

    def test_torus_distance_wraps(self):
        ring = SiteSpace.ring(8)
        assert ring.distance(0, 1) == 1
        assert ring.distance(0, 7) == 1
        assert ring.distance(0, 4) == 4
        grid = SiteSpace.torus(4, 4)
        assert grid.distance(grid.index((0, 0)), grid.index((3, 3))) == 2

    def test_validation(self):
        with pytest.raises(ValidationError):
            SiteSpace(0)
        with pytest.raises(DimensionMismatchError):
            SiteSpace(5, torus_sides=(2, 2))
        with pytest.raises(ValidationError):
            SiteSpace(7).coordinate(3)


class TestBuildKernel:
    def test_scalar_identity(self):
        k = build_kernel(KernelSpec.scalar(1.0), SiteSpace.ring(4))
        assert np.allclose(k.matrix, np.eye(4))
        assert np.allclose(k.marginal_kernel, 0.5 * np.eye(4))
        assert k.lambda_margin == pytest.approx(1.0)
        assert k.q_value == pytest.approx(0.0)

    def test_a2_derived_values(self, a2):
        assert a2.lambda_margin == pytest.approx(1.5, abs=1e-12)
        assert a2.q_value == pytest.approx(0.5, abs=1e-12)
        assert a2.op_norm == pytest.approx(2.5, abs=1e-12)
        assert a2.marginal_kernel[0, 0] == pytest.approx(23 / 35, abs=1e-12)
        assert a2.marginal_kernel[0, 1] == pytest.approx(2 / 35, abs=1e-12)

    def test_torus_convolution_margin(self, torus8):
        assert torus8.lambda_margin == pytest.approx(0.6, abs=1e-12)
        # circulant: every row carries the same profile
        assert torus8.matrix[0, 1] == pytest.approx(0.2)
        assert torus8.matrix[0, 7] == pytest.approx(0.2)
        assert torus8.matrix[0, 2] == 0.0

    def test_torus_requires_geometry(self):
        with pytest.raises(ValidationError):
            build_kernel(KernelSpec.torus_convolution(1.0, {1: 0.2}), SiteSpace(8))

    def test_not_hermitian(self):
        with pytest.raises(NotHermitianError):
            Kernel(np.array([[2.0, 0.5], [0.4, 2.0]]), SiteSpace(2))

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefiniteError):
            Kernel(np.array([[1.0, 2.0], [2.0, 1.0]]), SiteSpace(2))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            Kernel(np.eye(3), SiteSpace(2))
        with pytest.raises(DimensionMismatchError):
            build_kernel(KernelSpec.explicit(np.eye(3)), SiteSpace(4))

    def test_q_override(self, a2):
        k = build_kernel(KernelSpec.explicit(a2.matrix, q_value=0.9), SiteSpace(2))
        assert k.q_value == pytest.approx(0.9)
        with pytest.raises(ValidationError):
            build_kernel(KernelSpec.explicit(a2.matrix, q_value=0.3), SiteSpace(2))

    def test_real_matrix_stored_as_float(self, complex4):
        real = Kernel((1 + 0j) * np.eye(3), SiteSpace(3))
        assert not real.is_complex
        assert complex4.is_complex


class TestAssumptionA:
    def test_identity(self):
        k = build_kernel(KernelSpec.scalar(1.0), SiteSpace.ring(4))
        rep = check_assumption_a(k)
        assert rep.holds and rep.lam == pytest.approx(1.0)

    def test_a2(self, a2):
        rep = check_assumption_a(a2)
        assert rep.holds and rep.lam == pytest.approx(1.5)

    def test_complex_margin_uses_component_sum(self):
        # |0.6 + 0.6i| = 0.849 < 1 (dominant in modulus), but the
        # |Re| + |Im| margin is 1 - 1.2 < 0, so the check must fail.
        a = np.array([[1.0, 0.6 + 0.6j], [0.6 - 0.6j, 1.0]])
        assert abs(a[0, 1]) < 1.0
        k = Kernel(a, SiteSpace(2))
        rep = check_assumption_a(k)
        assert not rep.holds
        assert rep.lam == pytest.approx(-0.2, abs=1e-12)


class TestRestriction:
    def test_full_window_recovers_kernel(self, a2, torus8, complex4):
        for k in (a2, torus8, complex4):
            full = restrict_a_bracket(k, range(k.n_sites))
            assert np.abs(full - k.matrix).max() < 1e-10

    def test_diagonal_kernel_restriction(self):
        k = build_kernel(KernelSpec.scalar(2.0), SiteSpace.ring(5))
        sub = restrict_a_bracket(k, [1, 3])
        assert np.allclose(sub, 2.0 * np.eye(2), atol=1e-12)

    def test_a2_single_site(self, a2):
        sub = restrict_a_bracket(a2, [0])
        assert sub[0, 0] == pytest.approx(23 / 12, abs=1e-12)

    def test_empty_window(self, a2):
        assert restrict_a_bracket(a2, []).shape == (0, 0)


class TestRoundTrip:
    def test_marginal_kernel_inverts(self, a2, torus8, complex4):
        for k in (a2, torus8, complex4, random_dd_kernel(7, seed=5, complex_entries=True)):
            km = k.marginal_kernel
            recon = np.linalg.solve(np.eye(k.n_sites, dtype=km.dtype) - km, km)
            rel = np.abs(recon - k.matrix).max() / k.op_norm
            assert rel < 1e-10

    def test_marginal_spectrum_in_unit_interval(self, torus8):
        eig = np.linalg.eigvalsh(torus8.marginal_kernel)
        assert eig.min() > 0.0
        assert eig.max() < 1.0


class TestMatrixFile:
    def test_real_roundtrip(self, tmp_path, a2):
        path = tmp_path / "a2.txt"
        path.write_text("2\n2.0 0.5\n0.5 2.0\n")
        data = load_kernel_matrix(path)
        assert np.allclose(data, a2.matrix)
        assert not np.iscomplexobj(data)

    def test_complex_entries(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("2\n2 0.3+0.4j\n0.3-0.4j 2\n")
        data = load_kernel_matrix(path)
        assert data[0, 1] == pytest.approx(0.3 + 0.4j)
        Kernel(data, SiteSpace(2))

    def test_errors(self, tmp_path):
        bad_count = tmp_path / "short.txt"
        bad_count.write_text("2\n1 0\n")
        with pytest.raises(ValidationError):
            load_kernel_matrix(bad_count)
        bad_entry = tmp_path / "entry.txt"
        bad_entry.write_text("1\noops\n")
        with pytest.raises(ValidationError):
            load_kernel_matrix(bad_entry)
        empty = tmp_path / "empty.txt"
        empty.write_text("")
        with pytest.raises(ValidationError):
            load_kernel_matrix(empty)
