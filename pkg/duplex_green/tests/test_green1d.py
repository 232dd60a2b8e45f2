"""
Unit tests for the one-dimensional kernels and transfer kernels.
"""

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from duplex_green.core import tangential_metric
from duplex_green.green1d import (
    FiniteDifferenceGreen,
    HomogeneousGreen1D,
    StratifiedGreen,
    compose,
    fd_green_1d,
    fd_richardson,
    homogeneous_green_1d,
    identity_transfer,
    scalar_block,
    scalar_jump,
    staggered_grid,
    stratified_green,
    stack_from_profile,
    tangential_jump,
    transfer_kernel,
)
from duplex_green.media import VACUUM
from duplex_green.models import Layer, MaterialProfile, Medium, TransferKernel

GLASS = Medium("glass", eps_static=2.25)
LOSSY = Medium("lossy", eps_static=2.0 + 0.3j)


def slab_profile(medium=GLASS):
    return MaterialProfile((Layer(-0.5, 0.5, medium),), VACUUM)


def scalar_operator_residual(g, z, z_prime, eps, mu, k0, step=1e-5):
    """-i sigma_x dg/dz - k0 diag(eps, mu) g away from the source."""
    derivative = (g(z + step, z_prime) - g(z - step, z_prime)) / (2.0 * step)
    sigma_x = np.array([[0.0, 1.0], [1.0, 0.0]])
    return -1j * sigma_x @ derivative - k0 * np.diag([eps, mu]) @ g(z, z_prime)


class TestHomogeneousGreen1D:
    """Tests for the analytic homogeneous kernel."""

    def test_vacuum_closed_form(self):
        """Test g = (i/2) exp(ik|dz|) [[1, s], [s, 1]] in vacuum."""
        g = HomogeneousGreen1D(1.0, 1.0, 1.0)
        expected = 0.5j * np.exp(0.5j) * np.ones((2, 2))
        np.testing.assert_allclose(g(0.5, 0.0), expected, atol=1e-15)
        np.testing.assert_allclose(homogeneous_green_1d(1.0, 1.0, 0.5, 0.0), expected, atol=1e-15)

    def test_coincidence_average(self):
        """Test that off-diagonal entries vanish at z = z'."""
        g = HomogeneousGreen1D(2.0, 1.0, 1.0)
        value = g(0.3, 0.3)
        assert value[0, 1] == 0 and value[1, 0] == 0

    def test_source_free_equation(self):
        """Test M g = 0 away from the source in a lossy medium."""
        g = HomogeneousGreen1D(2.0 + 0.3j, 1.2, 1.3)
        residual = scalar_operator_residual(g, 0.8, 0.1, g.eps, g.mu, g.k0)
        assert np.max(np.abs(residual)) < 1e-8

    def test_jump(self):
        """Test that the kernel jumps by i sigma_x across the source."""
        g = HomogeneousGreen1D(1.0, 1.0, 1.0)
        eps = 1e-10
        np.testing.assert_allclose(g(eps, 0.0) - g(-eps, 0.0), scalar_jump(), atol=1e-9)

    def test_propagator_transports_columns(self):
        """Test g(z2, z') = U(z2, z1) g(z1, z') on the same side of the source."""
        g = HomogeneousGreen1D(2.0 + 0.1j, 1.0, 1.0)
        np.testing.assert_allclose(g.propagator(0.9, 0.4) @ g(0.4, 0.0), g(0.9, 0.0), atol=1e-14)

    def test_branch_difference(self):
        """Test that the branch difference is U(z, z') Jmp."""
        g = HomogeneousGreen1D(1.5, 1.0, 1.0)
        np.testing.assert_allclose(g.branch_difference(0.7, 0.2), g.propagator(0.7, 0.2) @ scalar_jump())

    def test_gain_rejected(self):
        """Test that gain media raise ValueError."""
        with pytest.raises(ValueError, match="gain media"):
            homogeneous_green_1d(1.0 - 0.1j, 1.0, 0.0, 1.0)

    def test_advanced_needs_lossless(self):
        """Test that advanced kernels of lossy media raise ValueError."""
        with pytest.raises(ValueError, match="lossless"):
            HomogeneousGreen1D(2.0 + 0.1j, 1.0, 1.0, boundary="advanced")

    def test_plane_wave(self):
        """Test the forward plane wave at its origin."""
        g = HomogeneousGreen1D(4.0, 1.0, 1.0)
        value = g.plane_wave(1)(np.array([0.0]))[0]
        np.testing.assert_allclose(value, [1.0, 0, 0, 0, 2.0, 0])

    def test_restrict(self):
        """Test a sub-block view of the kernel."""
        g = HomogeneousGreen1D(1.0, 1.0, 1.0)
        view = g.restrict((0,))
        assert view.components == (0,)
        assert view(0.5, 0.0).shape == (1, 1)
        assert view.jump().shape == (2, 2)


class TestStratifiedGreen:
    """Tests for the planar stratified kernel."""

    def test_vacuum_matches_homogeneous(self):
        """Test that a vacuum stack reproduces the homogeneous scalar kernel."""
        g = StratifiedGreen.from_profile(MaterialProfile((), VACUUM), 1.0)
        h = HomogeneousGreen1D(1.0, 1.0, 1.0)
        for z, z_prime in ((0.7, 0.2), (-0.4, 0.3), (0.25, 0.25)):
            np.testing.assert_allclose(scalar_block(g(z, z_prime)), h(z, z_prime), atol=1e-13)

    def test_slab_source_free_equation(self):
        """Test M g = 0 in the scalar sector inside and outside a lossy slab."""
        g = StratifiedGreen.from_profile(slab_profile(LOSSY), 1.0).restrict((0, 3))
        residual_in = scalar_operator_residual(g, 0.3, -0.2, 2.0 + 0.3j, 1.0, 1.0)
        residual_out = scalar_operator_residual(g, 0.9, -0.2, 1.0, 1.0, 1.0)
        assert np.max(np.abs(residual_in)) < 1e-8
        assert np.max(np.abs(residual_out)) < 1e-8

    def test_continuity_across_interface(self):
        """Test that tangential traces are continuous across an interface."""
        g = StratifiedGreen.from_profile(slab_profile(), 1.0, k_perp=(0.4, 0.0))
        below = g(0.5 - 1e-7, 0.0)
        above = g(0.5 + 1e-7, 0.0)
        np.testing.assert_allclose(below, above, atol=1e-5)

    def test_jump(self):
        """Test the source jump -i N(+z) of the tangential kernel."""
        g = StratifiedGreen.from_profile(slab_profile(), 1.0, k_perp=(0.3, 0.2))
        eps = 1e-10
        np.testing.assert_allclose(g(0.1 + eps, 0.1) - g(0.1 - eps, 0.1), tangential_jump(), atol=1e-8)

    def test_branch_difference(self):
        """Test g+ - g- = U(z, z') Jmp."""
        g = StratifiedGreen.from_profile(slab_profile(LOSSY), 1.0, k_perp=(0.2, 0.0))
        diff = g.branch(0.8, 0.1, 1) - g.branch(0.8, 0.1, -1)
        np.testing.assert_allclose(diff, g.branch_difference(0.8, 0.1), atol=1e-12)
        np.testing.assert_allclose(g.branch(0.8, 0.1, 1), g(0.8, 0.1), atol=1e-12)

    def test_interface_point_rejected(self):
        """Test that kernel samples on an interface raise ValueError."""
        g = StratifiedGreen.from_profile(slab_profile(), 1.0)
        with pytest.raises(ValueError, match="interface"):
            g(0.5, 0.0)

    def test_functional_form(self):
        """Test the stack-level helper."""
        stack = stack_from_profile(slab_profile(), 1.0)
        np.testing.assert_allclose(stratified_green(stack, 0.8, 0.1), StratifiedGreen(stack)(0.8, 0.1))


class TestTransferKernels:
    """Tests for surface-to-surface transfer kernels."""

    @pytest.mark.parametrize("k_perp", [(0.0, 0.0), (0.6, 0.0), (1.5, 0.5)])
    def test_exact_composition(self, k_perp):
        """Test T31 = T32 T21 including evanescent k_perp."""
        g = StratifiedGreen.from_profile(slab_profile(LOSSY), 1.0, k_perp=k_perp)
        t21 = transfer_kernel(g, -0.8, 0.2)
        t32 = transfer_kernel(g, 0.2, 0.9)
        t31 = transfer_kernel(g, -0.8, 0.9)
        composed = compose(t32, t21)
        scale = np.max(np.abs(t31.matrix))
        assert np.max(np.abs(composed.matrix - t31.matrix)) <= 1e-12 * scale

    def test_identity_at_coincidence(self):
        """Test T(z, z) = I."""
        g = StratifiedGreen.from_profile(slab_profile(), 1.0)
        np.testing.assert_allclose(transfer_kernel(g, 0.2, 0.2).matrix, np.eye(4))

    def test_normal_orientation_irrelevant(self):
        """Test that T does not depend on the sign of the planar normal."""
        g = StratifiedGreen.from_profile(slab_profile(), 1.0, k_perp=(0.3, 0.0))
        up = transfer_kernel(g, -0.7, 0.8, normal=1.0)
        down = transfer_kernel(g, -0.7, 0.8, normal=-1.0)
        np.testing.assert_allclose(up.matrix, down.matrix, atol=1e-14)

    @pytest.mark.parametrize("k_perp", [(0.0, 0.0), (1.4, 0.0)])
    def test_lossless_pseudo_unitarity(self, k_perp):
        """Test T N T^H = N for a lossless stack."""
        g = StratifiedGreen.from_profile(slab_profile(), 1.0, k_perp=k_perp)
        t = transfer_kernel(g, -0.7, 0.8).matrix
        n = tangential_metric(1.0)
        scale = max(1.0, float(np.max(np.abs(t))) ** 2)
        assert np.max(np.abs(t @ n @ t.conj().T - n)) <= 1e-12 * scale

    def test_source_inside_region(self):
        """Test that sources between the surfaces raise ValueError."""
        g = StratifiedGreen.from_profile(slab_profile(), 1.0)
        with pytest.raises(ValueError, match="inside the transfer region"):
            transfer_kernel(g, -0.5, 0.7, sources=(0.1,))

    def test_compose_mismatch(self):
        """Test that non-chaining surfaces are named in the error."""
        g = StratifiedGreen.from_profile(slab_profile(), 1.0)
        first = transfer_kernel(g, -0.8, 0.2, label="first")
        second = transfer_kernel(g, 0.3, 0.9, label="second")
        with pytest.raises(ValueError, match="first ends at z=0.2"):
            compose(second, first)

    def test_identity_transfer(self):
        """Test the identity element."""
        t = identity_transfer(0.0, 1.0)
        assert isinstance(t, TransferKernel) and t.dimension == 4

    def test_scalar_transfer(self):
        """Test the scalar transfer kernel of a restricted view."""
        g = StratifiedGreen.from_profile(slab_profile(), 1.0).restrict((0, 3))
        t = transfer_kernel(g, -0.7, 0.8)
        full = transfer_kernel(StratifiedGreen.from_profile(slab_profile(), 1.0), -0.7, 0.8)
        assert t.dimension == 2
        np.testing.assert_allclose(t.matrix, scalar_block(full.matrix))


class TestFiniteDifferenceOracle:
    """Tests for the finite-difference resolvent."""

    def test_matches_analytic_vacuum(self):
        """Test agreement with the analytic kernel at 200 points per wavelength."""
        h = 2.0 * math.pi / 200.0
        grid = staggered_grid(-3.0, 3.0, h, anchor=0.0)
        fd = FiniteDifferenceGreen(MaterialProfile((), VACUUM), grid, 1.0)
        exact = HomogeneousGreen1D(1.0, 1.0, 1.0)
        z = 40 * h
        value = scalar_block(fd(z, 0.0))
        assert np.max(np.abs(value - exact(z, 0.0))) < 1e-3

    def test_column_residual(self):
        """Test that the sparse solve satisfies the discrete equations."""
        h = 2.0 * math.pi / 100.0
        grid = staggered_grid(-2.0, 2.0, h, anchor=0.0)
        fd = FiniteDifferenceGreen(MaterialProfile((), VACUUM), grid, 1.0)
        assert fd.column_residual(0.0) < 1e-10

    def test_functional_form(self):
        """Test that fd_green_1d builds the same oracle."""
        h = 2.0 * math.pi / 100.0
        grid = staggered_grid(-2.0, 2.0, h, anchor=0.0)
        profile = MaterialProfile((), VACUUM)
        z = 10 * h
        np.testing.assert_allclose(
            fd_green_1d(profile, grid, None, 1.0)(z, 0.0), FiniteDifferenceGreen(profile, grid, 1.0)(z, 0.0)
        )

    def test_threaded_columns(self):
        """Test that concurrent samples share one cached column per source node."""
        h = 2.0 * math.pi / 100.0
        grid = staggered_grid(-2.0, 2.0, h, anchor=0.0)
        fd = FiniteDifferenceGreen(MaterialProfile((), VACUUM), grid, 1.0)
        targets = [k * h for k in (-20, -16, -12, -8, -4, 4, 8, 12, 16, 20)]
        serial = [fd(z, 0.0) for z in targets]
        fresh = FiniteDifferenceGreen(MaterialProfile((), VACUUM), grid, 1.0)
        with ThreadPoolExecutor(max_workers=4) as pool:
            threaded = list(pool.map(lambda z: fresh(z, 0.0), targets))
        for a, b in zip(serial, threaded):
            np.testing.assert_array_equal(a, b)
        assert len(fresh._columns) == 1

    def test_richardson(self):
        """Test the extrapolated sample against the analytic kernel."""
        h = 2.0 * math.pi / 200.0
        z = 40 * h
        value = fd_richardson(MaterialProfile((), VACUUM), -3.0, 3.0, h, 1.0, z, 0.0)
        assert value.shape == (4, 4)
        exact = HomogeneousGreen1D(1.0, 1.0, 1.0)(z, 0.0)
        assert np.max(np.abs(scalar_block(value) - exact)) < 2e-3

    def test_under_resolved(self):
        """Test that grids coarser than 20 points per wavelength raise ValueError."""
        grid = staggered_grid(-2.0, 2.0, 0.5, anchor=0.0)
        with pytest.raises(ValueError, match="fewer than 20 points"):
            FiniteDifferenceGreen(MaterialProfile((), VACUUM), grid, 1.0)

    def test_off_grid_sample(self):
        """Test that samples off the grid raise ValueError."""
        h = 2.0 * math.pi / 100.0
        grid = staggered_grid(-2.0, 2.0, h, anchor=0.0)
        fd = FiniteDifferenceGreen(MaterialProfile((), VACUUM), grid, 1.0)
        with pytest.raises(ValueError, match="not a node"):
            fd(0.5 * h, 0.0)

    def test_interfaces_on_half_nodes(self):
        """Test that interfaces must fall on half nodes."""
        with pytest.raises(ValueError, match="half node"):
            staggered_grid(-2.0, 2.0, 0.3, interfaces=(0.0, 0.1))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
