"""
Unit tests for the homogeneous 3D kernels.
"""

import numpy as np
import pytest

from duplex_green.config import SECTOR_ELECTRIC, SECTOR_MAGNETIC
from duplex_green.core import flip_pi
from duplex_green.green1d import HomogeneousGreen1D
from duplex_green.green3d import (
    Dyadic3,
    Green6,
    dyadic_gE,
    first_from_second,
    helmholtz_residual,
    maxwell_residual_6,
    planar_spectrum,
)
from duplex_green.models import Medium

R = np.array([0.4, -0.3, 0.7])
R_PRIME = np.array([-0.2, 0.1, 0.05])


@pytest.fixture
def lossy_kernel():
    return Green6(2.0 + 0.5j, 1.0, 1.3)


class TestGreen6:
    """Tests for the first-order 6x6 kernel."""

    def test_reciprocity(self, lossy_kernel):
        """Test g(r, r')^T = Pi g(r', r) Pi."""
        lhs = lossy_kernel(R, R_PRIME).T
        rhs = flip_pi() @ lossy_kernel(R_PRIME, R) @ flip_pi()
        np.testing.assert_allclose(lhs, rhs, atol=1e-14)

    def test_maxwell_residual(self, lossy_kernel):
        """Test that each column solves the source-free first-order system."""
        points = np.array([[1.0, 0.2, -0.3], [0.3, 0.9, 0.4]])
        assert maxwell_residual_6(lossy_kernel, R_PRIME, points, step=1e-3, order=4) < 1e-7

    def test_coincident_points(self, lossy_kernel):
        """Test that coincident points raise ValueError."""
        with pytest.raises(ValueError, match="Coincident points"):
            lossy_kernel(R, R)

    def test_batch_allows_quadrature_separation(self, lossy_kernel):
        """Test that batch evaluation accepts nodes inside the point-evaluation guard."""
        near = R + np.array([1e-4, 0.0, 0.0])
        with pytest.raises(ValueError, match="Coincident points"):
            lossy_kernel(near, R)
        assert np.all(np.isfinite(lossy_kernel.batch(near[None, :], R)))
        assert np.all(np.isfinite(lossy_kernel.batch_source(R, near[None, :])))
        with pytest.raises(ValueError, match="Coincident points"):
            lossy_kernel.batch(R[None, :], R)

    def test_gain_rejected(self):
        """Test that gain media raise ValueError."""
        with pytest.raises(ValueError, match="Im\\(n\\) >= 0"):
            Green6(2.0 - 0.5j, 1.0, 1.0)

    def test_batch_matches_single(self, lossy_kernel):
        """Test the vectorized evaluation."""
        rs = np.array([R, R + 0.5, R - 0.25])
        stacked = lossy_kernel.batch(rs, R_PRIME)
        for r, value in zip(rs, stacked):
            np.testing.assert_allclose(value, lossy_kernel(r, R_PRIME))

    def test_contact_term(self):
        """Test the delta coefficient of the electric block."""
        g = Green6(4.0, 1.0, 2.0)
        np.testing.assert_allclose(np.diag(g.contact_term())[:3], -1.0 / 24.0)

    def test_from_medium(self):
        """Test construction from a named medium."""
        g = Green6.from_medium(Medium("glass", eps_static=2.25), 1.0)
        assert abs(g.n - 1.5) < 1e-15


class TestDyadics:
    """Tests for the second-order dyadics and their primed curls."""

    def test_analytic_assembly(self, lossy_kernel):
        """Test that the closed-form assembly matches Green6."""
        g_e = Dyadic3(2.0 + 0.5j, 1.0, 1.3, SECTOR_ELECTRIC)
        g_h = Dyadic3(2.0 + 0.5j, 1.0, 1.3, SECTOR_MAGNETIC)
        np.testing.assert_allclose(first_from_second(g_e, g_h, R, R_PRIME), lossy_kernel(R, R_PRIME), atol=1e-14)

    def test_numerical_primed_curl(self):
        """Test the finite-difference primed curl against the closed form."""
        g_e = Dyadic3(1.5, 1.2, 0.9, SECTOR_ELECTRIC)
        g_h = Dyadic3(1.5, 1.2, 0.9, SECTOR_MAGNETIC)
        analytic = first_from_second(g_e, g_h, R, R_PRIME)
        numerical = first_from_second(g_e, g_h, R, R_PRIME, method="numerical")
        assert np.max(np.abs(numerical - analytic)) < 1e-7 * np.max(np.abs(analytic))

    def test_helmholtz_residual(self):
        """Test curl curl gE = k^2 gE away from the source."""
        g_e = Dyadic3(2.0, 1.0, 1.0, SECTOR_ELECTRIC)
        points = np.array([[0.8, 0.1, 0.2]])
        assert helmholtz_residual(g_e, R_PRIME, points, step=1e-3) < 1e-6

    def test_unknown_sector(self):
        """Test that unknown sectors raise ValueError."""
        with pytest.raises(ValueError, match="Unknown dyadic sector"):
            Dyadic3(1.0, 1.0, 1.0, "acoustic")

    def test_dyadic_ge(self):
        """Test the functional form of the electric dyadic."""
        medium = Medium("glass", eps_static=2.25)
        np.testing.assert_allclose(
            dyadic_gE(medium, 1.0, R, R_PRIME), Dyadic3(2.25, 1.0, 1.0)(R, R_PRIME)
        )

    def test_source_guard(self, lossy_kernel):
        """Test that points at the source raise ValueError."""
        with pytest.raises(ValueError, match="touch the source point"):
            maxwell_residual_6(lossy_kernel, R_PRIME, R_PRIME[None, :], step=1e-3)


class TestPlanarSpectrum:
    """Tests for the transverse-plane integral of the kernel."""

    def test_matches_one_dimensional_kernel(self):
        """Test that the Ex-Ex entry reproduces the 1D kernel at k_perp = 0."""
        g = Green6(2.0 + 1.0j, 1.0, 1.0)
        spectrum = planar_spectrum(g, 0.5, 0.0)
        expected = HomogeneousGreen1D(2.0 + 1.0j, 1.0, 1.0)(0.5, 0.0)[0, 0]
        assert abs(spectrum[0, 0] - expected) < 1e-6 * abs(expected)

    def test_lossless_rejected(self):
        """Test that lossless media raise ValueError."""
        with pytest.raises(ValueError, match="lossy medium"):
            planar_spectrum(Green6(2.0, 1.0, 1.0), 0.5, 0.0)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
