"""Model builders: classical forms, quantum frames, RP checks, entropy bounds."""

import itertools

import numpy as np
import pytest

from spinboard.models import (
    EntropyProfile,
    ModelSpec,
    V_HEX,
    bond_operator,
    bond_pattern_stats,
    block_edges,
    build_quantum_hamiltonian,
    classical_energy,
    classical_energy_completed_square,
    entropy_bound_constants,
    entropy_profile,
    heisenberg,
    nematic,
    nonlinear_xy,
    onetwenty,
    orbital_compass,
    power_mean_coeffs,
    rp_check,
    rp_transform,
    rp_transform_kind,
    single_bond_hamiltonian,
    spec_from_toml,
    spec_to_toml,
    _site_unitary_ua,
    _site_unitary_ub,
)
from spinboard.su2kit import SpinMagnitude, build_spin_operators, sample_sphere
from spinboard.torus import build_torus

CHAIN2 = build_torus(1, 2, 1)
HALF = SpinMagnitude(1)


def all_specs(S=HALF):
    return [
        heisenberg(S, CHAIN2, 0.3, 0.6),
        nonlinear_xy(S, CHAIN2, p=4),
        nonlinear_xy(S, CHAIN2, p=4, sign_mode="minus"),
        nematic(S, CHAIN2, p=4),
        orbital_compass(S, build_torus(2, 2, 1)),
        onetwenty(S, build_torus(3, 2, 1)),
    ]


def test_zz_term_spectrum():
    spec = heisenberg(HALF, CHAIN2, 0.0, 0.0)
    h = single_bond_hamiltonian(spec, frame="original")
    vals = np.sort(np.linalg.eigvalsh(h))
    assert np.allclose(vals, [-1.0, -1.0, 1.0, 1.0])


def test_hermiticity_all_kinds():
    for spec in all_specs():
        for frame in ("rp", "original"):
            H = build_quantum_hamiltonian(spec, frame=frame)
            assert np.abs(H - H.conj().T).max() < 1e-12


def test_heisenberg_rp_frame_is_ub_conjugation():
    spec = heisenberg(HALF, CHAIN2, 0.4, 0.7)
    Ho = build_quantum_hamiltonian(spec, frame="original")
    Hrp = build_quantum_hamiltonian(spec, frame="rp")
    U = rp_transform(spec)
    assert np.abs(U @ Ho @ np.linalg.inv(U) - Hrp).max() < 1e-11
    # term-by-term: x and z couplings ferromagnetic, y coupling sign -J2
    ops = build_spin_operators(HALF)
    s = HALF.S
    expect = (
        -(
            spec.J1 * np.kron(ops.Sx, ops.Sx)
            - spec.J2 * np.kron(ops.Sy, ops.Sy)
            + np.kron(ops.Sz, ops.Sz)
        )
        / s**2
    )
    assert np.allclose(single_bond_hamiltonian(spec, frame="rp"), expect)


def test_nematic_and_xy_rp_frames_are_lemma_conjugations():
    for spec in [
        nematic(HALF, CHAIN2, p=4),
        nonlinear_xy(HALF, CHAIN2, p=4),
        nonlinear_xy(HALF, CHAIN2, p=4, sign_mode="minus"),
    ]:
        Ho = build_quantum_hamiltonian(spec, frame="original")
        Hrp = build_quantum_hamiltonian(spec, frame="rp")
        U = rp_transform(spec)
        assert np.abs(U @ Ho @ U.conj().T - Hrp).max() < 1e-10


def test_compass_and_120_frames_spectrally_equivalent():
    # the rp frame differs from the conjugated original only by a lattice
    # axis relabeling, so spectra on a cubic torus must agree
    for spec in [
        orbital_compass(HALF, build_torus(2, 2, 1)),
        onetwenty(HALF, build_torus(3, 2, 1)),
    ]:
        Ho = build_quantum_hamiltonian(spec, frame="original")
        Hrp = build_quantum_hamiltonian(spec, frame="rp")
        U = rp_transform(spec)
        w1 = np.linalg.eigvalsh(U @ Ho @ U.conj().T)
        w2 = np.linalg.eigvalsh(Hrp)
        assert np.abs(w1 - w2).max() < 1e-10


def test_rp_transform_kinds():
    assert rp_transform_kind(orbital_compass(HALF, build_torus(2, 2, 1))) == "UA"
    assert rp_transform_kind(heisenberg(HALF, CHAIN2)) == "UB"
    assert rp_transform_kind(nonlinear_xy(HALF, CHAIN2, p=4, sign_mode="minus")) == "UBUA"
    assert rp_transform_kind(nonlinear_xy(HALF, CHAIN2, p=4)) == "UA"
    assert rp_transform_kind(nematic(HALF, CHAIN2, p=4)) == "UB"


def test_ua_cycles_components():
    S = SpinMagnitude(3)
    ops = build_spin_operators(S)
    u = _site_unitary_ua(S)
    ui = u.conj().T
    assert np.abs(u @ ops.Sy @ ui - ops.Sx).max() < 1e-12
    assert np.abs(u @ ops.Sx @ ui - ops.Sz).max() < 1e-12
    assert np.abs(u @ ops.Sz @ ui - ops.Sy).max() < 1e-12


def test_ub_flips_x_and_z():
    S = SpinMagnitude(2)
    ops = build_spin_operators(S)
    u = _site_unitary_ub(S)
    ui = u.conj().T
    assert np.abs(u @ ops.Sx @ ui + ops.Sx).max() < 1e-12
    assert np.abs(u @ ops.Sz @ ui + ops.Sz).max() < 1e-12
    assert np.abs(u @ ops.Sy @ ui - ops.Sy).max() < 1e-12


def test_xy_sign_modes_unitarily_equivalent():
    # rotation of one sublattice about the z-axis by pi maps one sign mode
    # to the other; on a single bond the spectra must coincide
    for S in [SpinMagnitude(1), SpinMagnitude(2)]:
        plus = nonlinear_xy(S, CHAIN2, p=5)
        minus = nonlinear_xy(S, CHAIN2, p=5, sign_mode="minus")
        w1 = np.linalg.eigvalsh(single_bond_hamiltonian(plus, frame="original"))
        w2 = np.linalg.eigvalsh(single_bond_hamiltonian(minus, frame="original"))
        assert np.abs(np.sort(w1) - np.sort(w2)).max() < 1e-10


def test_classical_compass_aligned():
    g = build_torus(2, 4, 2)
    spec = orbital_compass(SpinMagnitude(2), g)
    cfg = np.tile([1.0, 0.0, 0.0], (g.n_sites, 1))
    assert classical_energy(spec, cfg) == pytest.approx(-g.n_sites, abs=1e-12)


def test_classical_120_aligned():
    g = build_torus(3, 2, 1)
    spec = onetwenty(SpinMagnitude(2), g)
    cfg = np.tile(V_HEX[0], (g.n_sites, 1))
    assert classical_energy(spec, cfg) == pytest.approx(-1.5 * g.n_sites, abs=1e-12)


def test_completed_square_agrees():
    rng = np.random.default_rng(8)
    for spec in [
        orbital_compass(SpinMagnitude(2), build_torus(2, 4, 2)),
        onetwenty(SpinMagnitude(2), build_torus(3, 2, 1)),
    ]:
        for _ in range(5):
            cfg = sample_sphere(rng, spec.geometry.n_sites)
            a = classical_energy(spec, cfg)
            b = classical_energy_completed_square(spec, cfg)
            assert abs(a - b) < 1e-12


def test_rp_check_heisenberg():
    spec = heisenberg(HALF, CHAIN2, 0.5, 0.5)
    H = build_quantum_hamiltonian(spec, frame="rp")
    rep = rp_check(H, CHAIN2, HALF, beta=1.0, trials=200, seed=3)
    assert rep["min_expectation"] >= -1e-12
    assert rep["min_expectation_beta0"] >= -1e-12


def test_rp_check_identity_positive():
    spec = heisenberg(HALF, CHAIN2)
    H = build_quantum_hamiltonian(spec, frame="rp")
    rep = rp_check(H, CHAIN2, HALF, beta=2.0, trials=5, seed=0)
    assert rep["min_expectation"] > -1e-12


def test_rp_check_all_rp_frames():
    for spec in all_specs():
        g = spec.geometry
        H = build_quantum_hamiltonian(spec, frame="rp")
        rep = rp_check(H, g, spec.magnitude, beta=0.7, trials=60, seed=11)
        assert rep["min_expectation"] >= -1e-10, spec.kind


def test_entropy_profile_power_mean():
    prof = entropy_profile(16)
    assert prof.energy(1.0) == pytest.approx(1.0, abs=1e-14)
    assert prof.A(0.0) == pytest.approx(1.0, abs=1e-14)
    s = np.linspace(0.0, 50.0, 2001)
    gap = np.abs(prof.A(s) - prof.limit_A(s)).max()
    assert gap < 0.1
    # closed form A_p(s) = (1 - s/(2p))^p on the valid range
    ss = np.linspace(0.0, 2.0, 7)
    assert np.allclose(prof.A(ss), (1 - ss / 32.0) ** 16, atol=1e-12)


def test_entropy_profile_density_family():
    prof = entropy_profile(24, family="density", density=lambda t: 1.0)
    assert prof.energy(1.0) == pytest.approx(1.0, abs=1e-12)
    # flat density: A(s) = (1 - e^{-s})/s
    s = 3.0
    assert prof.limit_A(s) == pytest.approx((1 - np.exp(-s)) / s, rel=1e-3)


def test_entropy_bound_constants_hand_values():
    assert entropy_bound_constants(2, 0.1, 0.1, 1.0, A_p_t=0.9).a_d == 4
    assert entropy_bound_constants(3, 0.1, 0.1, 1.0, A_p_t=0.9).a_d == 12
    eb = entropy_bound_constants(2, 0.15, 0.2, 1.0, A_p_t=0.9)
    assert eb.Delta == pytest.approx(0.0833333333, abs=1e-9)
    assert eb.Delta_prime < 0  # infeasible b' at this A_p(t)
    good = entropy_bound_constants(2, 0.15, 0.45, 1.0, A_p_t=0.95)
    assert good.Delta_prime > 0 and good.feasible_b0


def test_bond_pattern_inequality_d2():
    a_d = 4
    for bits in itertools.product([False, True], repeat=a_d):
        if all(bits) or not any(bits):
            continue
        f_b, f_s = bond_pattern_stats(2, bits)
        assert f_b >= f_s + 1.0 / a_d - 1e-12


def test_block_edges_count():
    assert len(block_edges(2)) == 4
    assert len(block_edges(3)) == 12


def test_power_mean_coeffs_normalized():
    c = np.array(power_mean_coeffs(16))
    assert c.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(c >= 0)


def test_spec_validation():
    with pytest.raises(ValueError):
        heisenberg(HALF, CHAIN2, J1=1.2)
    with pytest.raises(ValueError):
        ModelSpec("nonlinear_xy", HALF, CHAIN2, coeffs=(0.5, 0.2))
    with pytest.raises(ValueError):
        onetwenty(HALF, build_torus(2, 2, 1))
    with pytest.raises(ValueError):
        ModelSpec("bogus", HALF, CHAIN2)


def test_toml_round_trip():
    for spec in all_specs():
        text = spec_to_toml(spec)
        back = spec_from_toml(text)
        assert back.kind == spec.kind
        assert back.magnitude == spec.magnitude
        assert back.geometry.d == spec.geometry.d
        assert back.geometry.L == spec.geometry.L
        assert back.coeffs == pytest.approx(spec.coeffs)
        assert back.sign_mode == spec.sign_mode
    with pytest.raises(ValueError):
        spec_from_toml('[model]\nkind = "heisenberg_af"\ntwoS = 1\nd = 1\nL = 2\nB = 1\nbogus = 3\n')
