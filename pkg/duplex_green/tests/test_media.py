"""
Unit tests for material models and material files.
"""

import json
import math

import numpy as np
import pytest

from duplex_green.media import (
    effective_mass,
    hermitian_split,
    is_passive,
    load_material_file,
    markov_coupling,
    material_tensor,
    medium_tensor,
    noise_ratio,
    noise_spectrum,
    parse_material_document,
    refractive_index,
    strength_from_mass,
    susceptibility,
)
from duplex_green.models import LorentzOscillator, MaterialProfile, MaterialTensor, Medium, UnitsMode


@pytest.fixture
def oscillator():
    return LorentzOscillator(omega0=1.0, gamma=0.1, strength=0.5)


class TestLorentzOscillator:
    """Tests for the oscillator model."""

    def test_susceptibility_value(self, oscillator):
        """Test chi = strength / (omega0^2 - omega^2 - i gamma omega)."""
        chi = susceptibility(oscillator, 2.0)
        expected = 0.5 / complex(1.0 - 4.0, -0.2)
        assert abs(chi - expected) < 1e-15

    def test_passive_loss(self, oscillator):
        """Test that Im chi > 0 at positive frequency."""
        assert susceptibility(oscillator, 0.7).imag > 0

    def test_drude_limit(self):
        """Test that omega0 = 0 gives -strength / (omega^2 + i gamma omega)."""
        osc = LorentzOscillator(omega0=0.0, gamma=0.2, strength=3.0)
        expected = -3.0 / complex(4.0, 0.4)
        assert abs(susceptibility(osc, 2.0) - expected) < 1e-15

    def test_pole(self):
        """Test that an undamped oscillator at resonance raises ZeroDivisionError."""
        osc = LorentzOscillator(omega0=1.0, gamma=0.0, strength=1.0)
        with pytest.raises(ZeroDivisionError, match="pole"):
            susceptibility(osc, 1.0)

    def test_negative_damping(self):
        """Test that negative damping raises ValueError."""
        with pytest.raises(ValueError, match="Damping rate"):
            LorentzOscillator(omega0=1.0, gamma=-0.1, strength=1.0)

    def test_unknown_sector(self):
        """Test that unknown sectors raise ValueError."""
        with pytest.raises(ValueError, match="Unknown oscillator sector"):
            LorentzOscillator(omega0=1.0, gamma=0.1, strength=1.0, sector="acoustic")


class TestMaterialTensor:
    """Tests for tensors, passivity and the refractive index."""

    def test_medium_tensor(self, oscillator):
        """Test eps = eps_static + chi and mu = 1."""
        medium = Medium("slab", (oscillator,), eps_static=2.0)
        tensor = medium_tensor(medium, 0.9)
        assert abs(tensor.eps[0, 0] - (2.0 + susceptibility(oscillator, 0.9))) < 1e-15
        assert tensor.mu[1, 1] == 1.0
        assert tensor.is_isotropic and tensor.is_reciprocal

    def test_material_tensor(self):
        """Test I + chi for scalar and 3x3 susceptibilities."""
        tensor = material_tensor(0.5, np.diag([0.1, 0.2, 0.3j]))
        np.testing.assert_allclose(tensor.eps, 1.5 * np.eye(3))
        np.testing.assert_allclose(np.diag(tensor.mu), [1.1, 1.2, 1.0 + 0.3j])

    def test_hermitian_split(self):
        """Test eps = eps_R + i eps_I."""
        tensor = MaterialTensor.isotropic(2.0 + 0.5j, 1.0 + 0.1j)
        real, imag = hermitian_split(tensor)
        np.testing.assert_allclose(real + 1j * imag, tensor.matrix)
        np.testing.assert_allclose(np.diag(imag), [0.5] * 3 + [0.1] * 3)

    def test_passivity(self):
        """Test passive and gain media."""
        assert is_passive(MaterialTensor.isotropic(2.0 + 0.1j))
        assert not is_passive(MaterialTensor.isotropic(2.0 - 0.1j))

    def test_refractive_index_branch(self):
        """Test the branch with Im n >= 0."""
        n = refractive_index(0.75 + 1.0j)
        assert abs(n - (1.0 + 0.5j)) < 1e-15

    def test_nonreciprocal(self):
        """Test that a non-symmetric tensor is flagged."""
        eps = np.eye(3, dtype=complex)
        eps[0, 1] = 0.1j
        assert not MaterialTensor(eps, np.eye(3)).is_reciprocal


class TestNoiseBath:
    """Tests for the oscillator-bath noise model."""

    def test_mass_round_trip(self, oscillator):
        """Test that strength_from_mass inverts effective_mass."""
        for units in (UnitsMode.DIMENSIONLESS, UnitsMode.SI):
            mass = effective_mass(oscillator, units)
            assert math.isclose(strength_from_mass(mass, oscillator.sector, units), oscillator.strength)

    def test_markov_coupling(self, oscillator):
        """Test |kappa|^2 = M hbar gamma omega / 4 pi^3 in dimensionless units."""
        value = markov_coupling(oscillator, 2.0, 1.5)
        assert math.isclose(value, 2.0 * 0.1 * 1.5 / (4.0 * math.pi ** 3))

    def test_markov_coupling_rejects_static(self, oscillator):
        """Test that omega <= 0 raises ValueError."""
        with pytest.raises(ValueError, match="positive frequency"):
            markov_coupling(oscillator, 1.0, 0.0)

    def test_noise_ratio_constant(self, oscillator):
        """Test that |chi_N|^2 / Im chi equals 1/pi at every frequency."""
        for omega in (0.3, 1.0, 2.5):
            assert math.isclose(noise_ratio(oscillator, omega), 1.0 / math.pi, rel_tol=1e-12)

    def test_lossless_noise(self):
        """Test that an undamped oscillator carries no noise."""
        osc = LorentzOscillator(omega0=1.0, gamma=0.0, strength=1.0)
        assert noise_spectrum(osc, 0.5) == 0j


class TestMaterialFiles:
    """Tests for material documents."""

    DOCUMENT = {
        "schema_version": 1,
        "background": "vacuum",
        "media": {
            "slab": {"eps_static": 2.0, "oscillators": [{"omega0": 1.0, "gamma": 0.1, "strength": 0.5}]},
            "absorber": {"eps": [0.75, 1.0]},
        },
        "layers": [
            {"material": "absorber", "z_min": 1.0, "z_max": 2.0},
            {"material": "slab", "z_min": -0.5, "z_max": 0.5},
        ],
    }

    def test_parse(self):
        """Test profile and media construction."""
        profile, media = parse_material_document(self.DOCUMENT)
        assert set(media) == {"vacuum", "slab", "absorber"}
        assert profile.interfaces == (-0.5, 0.5, 1.0, 2.0)
        assert profile.medium_at(0.0).name == "slab"
        assert profile.medium_at(0.75).name == "vacuum"
        assert medium_tensor(media["absorber"], 3.0).eps[2, 2] == 0.75 + 1.0j

    def test_unknown_material(self):
        """Test that layers naming unknown media raise ValueError."""
        document = dict(self.DOCUMENT, layers=[{"material": "gold", "z_min": 0.0, "z_max": 1.0}])
        with pytest.raises(ValueError, match="unknown material"):
            parse_material_document(document)

    def test_schema_version(self):
        """Test that other schema versions are rejected."""
        with pytest.raises(ValueError, match="schema_version"):
            parse_material_document(dict(self.DOCUMENT, schema_version=2))

    def test_overlapping_layers(self):
        """Test that overlapping layers raise ValueError."""
        document = dict(self.DOCUMENT, layers=[
            {"material": "slab", "z_min": 0.0, "z_max": 1.0},
            {"material": "slab", "z_min": 0.5, "z_max": 2.0},
        ])
        with pytest.raises(ValueError, match="Layers overlap"):
            parse_material_document(document)

    def test_load_file(self, tmp_path):
        """Test loading a material file from disk."""
        path = tmp_path / "materials.json"
        path.write_text(json.dumps(self.DOCUMENT), encoding="utf-8")
        profile, _ = load_material_file(path)
        assert isinstance(profile, MaterialProfile)
        assert len(profile.layers) == 2

    def test_missing_file(self, tmp_path):
        """Test that a missing file raises FileNotFoundError naming the path."""
        with pytest.raises(FileNotFoundError, match="missing.json"):
            load_material_file(tmp_path / "missing.json")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
