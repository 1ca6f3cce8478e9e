import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dipchain.model import (
    BOHR_MAGNETON_CGS,
    ChainConfig,
    Spin,
    SpinSystem,
    ValidityWarning,
    coupling_constant,
    electron_coupling_mhz,
    error_probability,
    ground_state,
    magnetization,
    mhz_to_rad_us,
    physical_magnetization,
    state_energy,
    sz,
)


def _basis(n, p):
    psi = np.zeros(2**n, dtype=complex)
    psi[p] = 1
    return psi


def test_sz_convention():
    assert sz(0, 3) == 0.5
    assert sz(0b111, 2, n=3) == -0.5
    assert sz(0b001, 0) == -0.5
    assert sz(0b001, 1) == 0.5


@pytest.mark.parametrize("p,l", [(8, 0), (0, 3), (-1, 0)])
def test_sz_out_of_range(p, l):
    with pytest.raises(IndexError):
        sz(p, l, n=3)


def test_single_spin_energy():
    cfg = ChainConfig(L=1, omega0=5.0, delta_omega=1.0, J=0.0)
    assert state_energy(0, SpinSystem.from_chain(cfg)) == pytest.approx(-2.5)


def test_two_spin_ground_energy():
    cfg = ChainConfig(L=2, omega0=50.0, delta_omega=7.0, J=-3.0, A=1.5)
    expected = -(50.0 + 57.0) / 2 - cfg.J / (4 * cfg.A**3)
    assert state_energy(0, SpinSystem.from_chain(cfg)) == pytest.approx(expected, rel=1e-14)


def _chain_energy_double_sum(p, cfg):
    # direct evaluation on the ideal chain with 1/(k-l)^3 couplings
    s = [sz(p, l) for l in range(cfg.L)]
    e = -sum(cfg.larmor(l) * s[l] for l in range(cfg.L))
    for l in range(cfg.L):
        for k in range(l + 1, cfg.L):
            e -= cfg.J / cfg.A**3 / (k - l) ** 3 * s[l] * s[k]
    return e


@pytest.mark.parametrize("L", [1, 2, 5, 10])
def test_energies_match_double_sum(L):
    cfg = ChainConfig(L=L, omega0=300.0, delta_omega=40.0, J=-2.0, A=2.2)
    sys_ = SpinSystem.from_chain(cfg)
    vec = sys_.energies()
    for p in range(2**L):
        ref = _chain_energy_double_sum(p, cfg)
        assert vec[p] == pytest.approx(ref, rel=1e-12, abs=1e-10)
        if L <= 5:
            assert state_energy(p, sys_) == pytest.approx(ref, rel=1e-12, abs=1e-10)


def test_complement_symmetry():
    cfg = ChainConfig(L=5, omega0=30.0, delta_omega=4.0, J=-1.0, A=1.0)
    sys_ = SpinSystem.from_chain(cfg)
    e = sys_.energies()
    zeeman = -(0.5 - ((np.arange(32)[:, None] >> np.arange(5)) & 1)) @ sys_.larmor
    ising = e - zeeman
    comp = 31 - np.arange(32)
    np.testing.assert_allclose(ising, ising[comp], atol=1e-12)
    np.testing.assert_allclose(zeeman, -zeeman[comp], atol=1e-12)


def test_geometry_reduction():
    cfg = ChainConfig(L=6, omega0=1.0, delta_omega=1.0, J=-7.0, A=2.2)
    c = SpinSystem.from_chain(cfg).couplings
    for l in range(6):
        for k in range(6):
            if l != k:
                assert c[l, k] == pytest.approx(cfg.J / (cfg.A * abs(k - l)) ** 3, rel=1e-12)


def test_undisplaced_chain_larmor():
    cfg = ChainConfig(L=4, omega0=10.0, delta_omega=-3.0, J=1.0)
    np.testing.assert_array_equal(SpinSystem.from_chain(cfg).larmor, [10.0, 7.0, 4.0, 1.0])


def test_displacement_moves_position_and_frequency():
    cfg = ChainConfig(L=3, omega0=10.0, delta_omega=2.0, J=-1.0, A=2.0)
    sys_ = SpinSystem.from_chain(cfg, {1: 0.25})
    assert sys_.spins[1].x == pytest.approx(2.5)
    assert sys_.larmor[1] == pytest.approx(12.5)
    assert sys_.couplings[0, 1] == pytest.approx(-1.0 / 2.5**3)


def test_coincident_spins_rejected():
    with pytest.raises(ValueError):
        SpinSystem((Spin(0, 0, 1.0), Spin(0, 0, 2.0)), 1.0)


def test_electron_coupling():
    assert abs(electron_coupling_mhz()) == pytest.approx(52, rel=0.01)
    assert electron_coupling_mhz() < 0


def test_coupling_angles():
    mu = 2 * BOHR_MAGNETON_CGS
    magic = math.acos(1 / math.sqrt(3))
    assert coupling_constant(mu, magic) == pytest.approx(0, abs=1e-6 * abs(coupling_constant(mu)))
    assert coupling_constant(mu, 0.0) == pytest.approx(-2 * coupling_constant(mu, math.pi / 2), rel=1e-12)


def test_magnetization_and_error_extremes():
    n = 6
    assert magnetization(_basis(n, 0)) == pytest.approx(1)
    assert magnetization(_basis(n, 2**n - 1)) == pytest.approx(-1)
    ghz = (_basis(n, 0) + _basis(n, 2**n - 1)) / math.sqrt(2)
    assert magnetization(ghz) == pytest.approx(0, abs=1e-15)
    assert error_probability(ghz) == pytest.approx(0, abs=1e-15)
    assert error_probability(ground_state(n)) == pytest.approx(1)
    partial = (_basis(n, 0) + _basis(n, 0b000111)) / math.sqrt(2)
    assert error_probability(partial) == pytest.approx(0.5)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.data())
def test_magnetization_linear_in_weights(n, data):
    w = np.array(data.draw(st.lists(st.floats(0, 1), min_size=2**n, max_size=2**n)))
    if w.sum() < 1e-6:
        w[0] = 1.0
    w = w / w.sum()
    psi = np.sqrt(w) * np.exp(1j * np.arange(2**n))
    per_state = [magnetization(_basis(n, p)) for p in range(2**n)]
    assert magnetization(psi) == pytest.approx(float(w @ per_state), abs=1e-12)
    assert -1 - 1e-12 <= magnetization(psi) <= 1 + 1e-12
    assert 0 <= error_probability(psi) <= 1 + 1e-12


def test_chain_config_validation():
    with pytest.raises(ValueError):
        ChainConfig(L=0, omega0=1, delta_omega=1, J=1)
    with pytest.raises(ValueError):
        ChainConfig(L=2, omega0=1, delta_omega=0, J=1)
    with pytest.raises(ValueError):
        ChainConfig(L=2, omega0=1, delta_omega=1, J=1, A=-1)
    with pytest.raises(ValueError):
        ChainConfig(L=2, omega0=1, delta_omega=1, J=1, K=0)
    with pytest.warns(ValidityWarning):
        ChainConfig(L=2, omega0=1, delta_omega=1.0, J=1.0, A=1.0)


def test_alpha_roundtrip_keeps_sign():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        cfg = ChainConfig.from_mhz(4, 100.0, -141.0, -52.0).with_alpha(0.05)
    assert cfg.alpha == pytest.approx(0.05, rel=1e-14)
    assert cfg.delta_omega < 0
    assert cfg.hadamard_rabi == pytest.approx(0.05 * abs(cfg.delta_omega))
    assert mhz_to_rad_us(1.0) == pytest.approx(2 * math.pi)


def test_physical_magnetization():
    assert physical_magnetization(0.5, 2.0, 100, 7) == pytest.approx(350.0)
