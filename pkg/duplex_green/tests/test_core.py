"""
Unit tests for the dual-field algebra in duplex_green.core.
"""

import math

import numpy as np
import pytest

from duplex_green.core import (
    check_placement,
    dual_cross,
    dual_curl_apply,
    embed,
    endpoint_surface,
    energy_inner,
    flip_pi,
    gauss_legendre,
    interval_rule,
    love_surface_source,
    prefactors,
    reciprocal_inner,
    sphere_surface_rule,
    surface_pairing,
    symplectic_j,
    tangential_metric,
    time_reverse,
    wavenumber,
    windowed_plane_rule,
    yee_sample,
)
from duplex_green.config import C0_SI, SCALAR_SECTOR
from duplex_green.green1d import HomogeneousGreen1D, StratifiedGreen
from duplex_green.media import VACUUM
from duplex_green.models import DualField, Geometry, Grid, Layer, MaterialProfile, Medium, Quadrature, UnitsMode


def constant_field(vector, omega=1.0):
    vector = np.asarray(vector, dtype=complex)
    return DualField(None, omega, evaluator=lambda p: np.tile(vector, (np.asarray(p).shape[0], 1)))


class TestSurfaceOperators:
    """Tests for the surface, flip and trace operators."""

    def test_dual_cross_action(self):
        """Test that (n x) maps [E; V] to [n x V; -n x E]."""
        n = np.array([0.0, 0.6, 0.8])
        e = np.array([1.0, 2.0, -1.0])
        v = np.array([0.5, -1.0, 3.0])
        out = dual_cross(n) @ np.concatenate([e, v])
        np.testing.assert_allclose(out[:3], np.cross(n, v))
        np.testing.assert_allclose(out[3:], -np.cross(n, e))

    def test_symplectic_j(self):
        """Test that J is antisymmetric and squares to minus the identity."""
        j = symplectic_j()
        np.testing.assert_array_equal(j, [[0.0, 1.0], [-1.0, 0.0]])
        np.testing.assert_array_equal(j @ j, -np.eye(2))
        np.testing.assert_array_equal(j.T, -j)

    def test_dual_cross_symmetric(self):
        """Test that the surface operator is real symmetric."""
        m = dual_cross([1.0, 0.0, 0.0])
        np.testing.assert_array_equal(m, m.T)

    def test_dual_cross_square_is_tangential_projector(self):
        """Test that (n x)^2 projects both fields onto the tangent plane."""
        n = np.array([0.0, 0.0, 1.0])
        p = np.eye(3) - np.outer(n, n)
        expected = np.zeros((6, 6))
        expected[:3, :3] = p
        expected[3:, 3:] = p
        np.testing.assert_allclose(dual_cross(n) @ dual_cross(n), expected, atol=1e-15)

    def test_dual_cross_rejects_non_unit(self):
        """Test that non-unit normals raise ValueError."""
        with pytest.raises(ValueError, match="unit 3-vector"):
            dual_cross([0.0, 0.0, 2.0])

    def test_tangential_metric_squares_to_identity(self):
        """Test that planar metrics square to the identity."""
        for n_z in (1.0, -1.0):
            t = tangential_metric(n_z)
            s = tangential_metric(n_z, SCALAR_SECTOR)
            np.testing.assert_allclose(t @ t, np.eye(4))
            np.testing.assert_allclose(s @ s, np.eye(2))

    def test_scalar_metric_is_minus_sigma_x(self):
        """Test the (Ex, Z0Hy) metric for the +z normal."""
        np.testing.assert_allclose(tangential_metric(1.0, SCALAR_SECTOR), [[0.0, -1.0], [-1.0, 0.0]])

    def test_tangential_metric_rejects_oblique(self):
        """Test that oblique planar normals raise ValueError."""
        with pytest.raises(ValueError, match="Planar normals"):
            tangential_metric(0.5)

    def test_flip(self):
        """Test the field-flip operator."""
        np.testing.assert_array_equal(np.diag(flip_pi()), [1, 1, 1, -1, -1, -1])

    def test_embed(self):
        """Test embedding of a restricted vector."""
        out = embed([2.0, 3.0], SCALAR_SECTOR)
        np.testing.assert_array_equal(out, [2, 0, 0, 0, 3, 0])


class TestUnits:
    """Tests for the prefactor table."""

    def test_dimensionless_prefactors(self):
        """Test that hbar = eps0 = c = 1 in dimensionless mode."""
        table = prefactors(2.0)
        assert math.isclose(table.hbar_over_pi_eps0, 1.0 / math.pi)
        assert math.isclose(table.boundary, 1.0 / math.pi)
        assert math.isclose(table.volume, 4.0 / math.pi)
        assert math.isclose(table.target, 2.0 / math.pi)

    def test_si_wavenumber(self):
        """Test k0 = omega / c in SI mode."""
        assert math.isclose(wavenumber(C0_SI, UnitsMode.SI), 1.0)

    def test_nonpositive_frequency(self):
        """Test that omega <= 0 raises ValueError."""
        with pytest.raises(ValueError, match="must be positive"):
            wavenumber(0.0)


class TestQuadrature:
    """Tests for the quadrature builders."""

    def test_gauss_legendre_polynomial(self):
        """Test exactness on a quadratic."""
        x, w = gauss_legendre(2)
        assert math.isclose(float(np.sum(w * x ** 2)), 2.0 / 3.0)

    def test_interval_rule_breakpoints(self):
        """Test that breakpoints split the panels and weights sum to the length."""
        q = interval_rule(-1.0, 2.0, 8, breakpoints=(0.5,))
        assert math.isclose(float(np.sum(q.weights)), 3.0)
        assert np.sum(q.nodes < 0.5) == 8

    def test_interval_rule_integrates_exponential(self):
        """Test a smooth integral to near machine precision."""
        q = interval_rule(0.0, 1.0, 16)
        assert math.isclose(float(np.sum(q.weights * np.exp(q.nodes))), math.e - 1.0, rel_tol=1e-14)

    def test_sphere_rule(self):
        """Test area and outward normals of the sphere rule."""
        q = sphere_surface_rule([1.0, 0.0, 0.0], 2.0, 8, 16)
        assert math.isclose(float(np.sum(q.weights)), 16.0 * math.pi, rel_tol=1e-12)
        np.testing.assert_allclose(q.nodes - [1.0, 0.0, 0.0], 2.0 * q.normals)

    def test_windowed_plane_rule(self):
        """Test that the plane rule integrates a Gaussian and carries the plane normal."""
        q = windowed_plane_rule(0.4, 8.0, 1.0, 8, 16, 0.25, normal_z=-1.0)
        np.testing.assert_allclose(q.nodes[:, 2], 0.4)
        np.testing.assert_allclose(q.normals, np.tile([0.0, 0.0, -1.0], (q.size, 1)))
        rho2 = q.nodes[:, 0] ** 2 + q.nodes[:, 1] ** 2
        assert math.isclose(float(np.sum(q.weights * np.exp(-rho2))), math.pi, rel_tol=1e-8)

    def test_window_reduces_weight(self):
        """Test that the taper removes weight from the outer annulus."""
        total = float(np.sum(windowed_plane_rule(0.0, 2.0, 0.5, 8, 16, 0.5).weights))
        assert math.pi < total < 4.0 * math.pi

    def test_nonpositive_weights(self):
        """Test that non-positive weights raise ValueError."""
        with pytest.raises(ValueError, match="positive"):
            Quadrature(np.array([0.0, 1.0]), np.array([1.0, 0.0]))


class TestInnerProducts:
    """Tests for energy, reciprocal and surface pairings."""

    def test_energy_inner_constant(self):
        """Test the energy inner product of constant fields."""
        f = constant_field(np.full(6, 1.0 + 1.0j))
        q = interval_rule(0.0, 2.0, 4)
        assert math.isclose(energy_inner(f, f, q).real, 24.0)

    def test_reciprocal_inner_flip(self):
        """Test that the reciprocal pairing carries Pi and no conjugation."""
        f = constant_field(np.ones(6))
        q = interval_rule(0.0, 1.0, 4)
        assert abs(reciprocal_inner(f, f, q)) < 1e-15

    def test_surface_pairing_flux(self):
        """Test that the pairing is -2 times the outward flux."""
        f = DualField(
            None,
            1.0,
            evaluator=lambda z: np.stack(
                [np.asarray(z), 0 * z, 0 * z, 0 * z, np.ones_like(z), 0 * z], axis=-1
            ),
        )
        value = surface_pairing(f, f, endpoint_surface(0.0, 1.0))
        assert math.isclose(value.real, -2.0)

    def test_frequency_mismatch(self):
        """Test that fields at different frequencies are rejected."""
        q = interval_rule(0.0, 1.0, 4)
        with pytest.raises(ValueError, match="different frequencies"):
            energy_inner(constant_field(np.ones(6), 1.0), constant_field(np.ones(6), 2.0), q)


class TestDualCurl:
    """Tests for the discrete Maxwell Hamiltonian."""

    def test_forward_plane_wave_eigenvector(self):
        """Test that a vacuum plane wave satisfies H f = k0 f."""

        def wave(z):
            values = np.zeros((z.size, 6), dtype=complex)
            values[:, 0] = np.exp(1j * z)
            values[:, 4] = np.exp(1j * z)
            return values

        f = yee_sample(wave, Grid.uniform_1d(0.0, 1.0, 2001), 1.0)
        out = dual_curl_apply(f)
        np.testing.assert_allclose(out.values, f.values, atol=1e-5)
        assert out.metadata["stencil"] == "yee-staggered"
        assert out.metadata["one_sided_edges"]

    def test_constant_field(self):
        """Test that a constant field has zero curl, edges included."""
        f = yee_sample(lambda z: np.ones((z.size, 6), dtype=complex), Grid.uniform_1d(0.0, 1.0, 9), 1.0)
        np.testing.assert_allclose(dual_curl_apply(f).values, 0.0, atol=1e-10)

    def test_yee_sample_layout(self):
        """Test that magnetic columns are sampled on half nodes."""
        grid = Grid.uniform_1d(0.0, 1.0, 5)
        f = yee_sample(lambda z: np.tile(z[:, None], (1, 6)), grid, 1.0)
        np.testing.assert_allclose(f.values[:, 0].real, grid.axes[0])
        np.testing.assert_allclose(f.values[:-1, 3].real, grid.half_nodes)
        assert f.values[-1, 3] == 0.0

    def test_checkerboard_not_annihilated(self):
        """Test that an alternating electric field has a nonzero staggered curl."""
        grid = Grid.uniform_1d(0.0, 1.0, 11)
        values = np.zeros((11, 6), dtype=complex)
        values[:, 0] = (-1.0) ** np.arange(11)
        out = dual_curl_apply(DualField(values, 1.0, grid=grid, metadata={"layout": "yee"}))
        np.testing.assert_allclose(np.abs(out.values[:-1, 4]), 20.0)

    def test_requires_grid(self):
        """Test that pointwise fields are rejected."""
        with pytest.raises(ValueError, match="sampled on a grid"):
            dual_curl_apply(constant_field(np.ones(6)))

    def test_requires_staggered_layout(self):
        """Test that collocated samples are rejected."""
        grid = Grid.uniform_1d(0.0, 1.0, 5)
        with pytest.raises(ValueError, match="staggered"):
            dual_curl_apply(DualField(np.ones((5, 6)), 1.0, grid=grid))

    def test_no_three_dimensional_curl(self):
        """Test that 3D grids are rejected."""
        axis = np.linspace(0.0, 1.0, 4)
        grid = Grid((axis, axis, axis))
        field = DualField(np.ones((4, 4, 4, 6)), 1.0, grid=grid, metadata={"layout": "yee"})
        with pytest.raises(ValueError, match="1D grids only"):
            dual_curl_apply(field)


class TestKernelHelpers:
    """Tests for the loss, wavelength and placement helpers shared by the checks."""

    def test_loss_at_homogeneous(self):
        """Test that a homogeneous kernel broadcasts one loss tensor."""
        loss = HomogeneousGreen1D(2.0 + 0.2j, 1.0, 1.0).loss_at(np.array([0.0, 0.5, 1.0]))
        assert loss.shape == (3, 2, 2)
        np.testing.assert_allclose(loss[:, 0, 0], 0.2)
        np.testing.assert_allclose(loss[:, 1, 1], 0.0)

    def test_loss_at_stratified(self):
        """Test per-node loss inside and outside a lossy layer."""
        profile = MaterialProfile((Layer(-0.5, 0.5, Medium("lossy", eps_static=2.0 + 0.3j)),), VACUUM)
        loss = StratifiedGreen.from_profile(profile, 1.0).loss_at(np.array([0.0, 0.9]))
        np.testing.assert_allclose(loss[:, 0, 0], [0.3, 0.0], atol=1e-15)

    def test_wavelength(self):
        """Test the wavelength in the kernel medium."""
        assert math.isclose(HomogeneousGreen1D(2.25, 1.0, 1.0).wavelength, 2.0 * math.pi / 1.5)

    def test_check_placement(self):
        """Test that points outside the geometry or on an interface raise ValueError."""
        geom = Geometry.interval(-1.0, 1.0, breakpoints=(0.5,))
        check_placement(geom, (-0.3, 0.7))
        with pytest.raises(ValueError, match="not strictly inside"):
            check_placement(geom, (1.5,))
        with pytest.raises(ValueError, match="lies on an interface"):
            check_placement(geom, (0.5,))


class TestEquivalentSources:
    """Tests for time reversal and surface sources."""

    def test_time_reverse(self):
        """Test that time reversal conjugates and flips."""
        f = constant_field([1j, 0, 0, 2j, 0, 0])
        out = time_reverse(f).at(np.array([0.0]))[0]
        np.testing.assert_allclose(out, [-1j, 0, 0, 2j, 0, 0])

    def test_love_surface_source(self):
        """Test S = -i (n x) E on the surface."""
        f = constant_field([1, 0, 0, 0, 0, 0])
        source = love_surface_source(f, endpoint_surface(0.0, 1.0))
        np.testing.assert_allclose(source.values[1], -1j * dual_cross([0, 0, 1]) @ [1, 0, 0, 0, 0, 0])
        np.testing.assert_allclose(source.weights, [1.0, 1.0])


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
