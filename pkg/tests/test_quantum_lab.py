"""Gibbs ensembles, matrix-element bounds, Berezin-Lieb, and Q-hat estimates."""

from dataclasses import replace

import numpy as np
import pytest

from spinboard.models import (
    build_quantum_hamiltonian,
    heisenberg,
    orbital_compass,
    single_bond_hamiltonian,
)
from spinboard.quantum_lab import (
    berezin_lieb_check,
    chessboard_check_quantum,
    expectation,
    full_bound_check,
    gibbs,
    kappa_sweep,
    matrix_element,
    offdiagonal_excess_means,
    q_hat,
    sandwich_check,
    single_site_q_hat,
    single_spin_diagonal_element,
    single_spin_field_check,
)
from spinboard.su2kit import (
    SpinMagnitude,
    build_spin_operators,
    coherent_amplitudes,
    product_coherent_vector,
    sample_sphere,
)
from spinboard.symbols import sphere_quadrature
from spinboard.torus import build_torus, cap_event, complement_site_event, full_event

CHAIN2 = build_torus(1, 2, 1)
HALF = SpinMagnitude(1)


def matrix_within_sigma(err, sigma, k=3.0):
    """Aggregate (Frobenius) k-sigma gate plus a generous entrywise screen.

    Entrywise 3-sigma flakes across hundreds of entries; the Frobenius norm
    of the error concentrates near the Frobenius norm of sigma, so k times
    that is a stable statistical tolerance.
    """
    err = np.abs(np.asarray(err))
    sigma = np.asarray(sigma)
    ok_aggregate = np.linalg.norm(err) <= k * np.linalg.norm(sigma) + 1e-9
    ok_entry = np.all(err <= (k + 2.0) * sigma + 1e-9)
    return bool(ok_aggregate and ok_entry)


def test_gibbs_beta_zero():
    H = np.diag([0.0, 1.0, 2.0]).astype(complex)
    ens = gibbs(H, 0.0)
    assert ens.Z == pytest.approx(3.0)
    assert expectation(ens, np.eye(3, dtype=complex)) == pytest.approx(1.0)


def test_gibbs_single_spin_partition_function():
    ops = build_spin_operators(HALF)
    for beta in [0.3, 1.0, 2.5]:
        ens = gibbs(ops.Sz / HALF.S, beta)
        assert ens.Z == pytest.approx(2 * np.cosh(beta), rel=1e-12)


def test_trace_recovered_by_coherent_quadrature():
    S = HALF
    spec = heisenberg(S, CHAIN2, 0.2, 0.4)
    H = build_quantum_hamiltonian(spec, frame="rp")
    ens = gibbs(H, 1.0)
    quad = sphere_quadrature(16)
    amps = coherent_amplitudes(S.twoS, quad.theta, quad.phi)
    n = quad.n_nodes
    pair = np.einsum("ia,jb->ijab", amps, amps).reshape(n * n, -1)
    C = pair @ ens.evecs.conj()
    diag = (np.abs(C) ** 2 @ ens.boltzmann_weights()).real
    W = np.outer(quad.weights, quad.weights).ravel()
    trace = (S.dim / (4 * np.pi)) ** 2 * (W * diag).sum() * np.exp(
        -ens.beta * ens.evals.min()
    )
    assert abs(trace - ens.Z) / ens.Z < 1e-8


def test_matrix_element_beta_zero_is_overlap():
    from spinboard.su2kit import overlap, SphericalPoint

    S = SpinMagnitude(3)
    ops = build_spin_operators(S)
    ens = gibbs(ops.Sz / S.S, 0.0)
    rng = np.random.default_rng(0)
    a, b = sample_sphere(rng, 1), sample_sphere(rng, 1)
    got = matrix_element(ens, a, b, S)
    pa = SphericalPoint.from_cartesian(a[0])
    pb = SphericalPoint.from_cartesian(b[0])
    assert got == pytest.approx(overlap(S, pa, pb), abs=1e-12)


def test_single_spin_diagonal_closed_form():
    for twoS in [1, 4]:
        S = SpinMagnitude(twoS)
        ops = build_spin_operators(S)
        ens = gibbs(ops.Sz / S.S, 1.0)
        for theta in [0.0, np.pi / 2, 2.2]:
            cfg = np.array([[np.sin(theta), 0.0, np.cos(theta)]])
            got = matrix_element(ens, cfg, cfg, S).real
            want = single_spin_diagonal_element(twoS, 1.0, theta)
            assert got == pytest.approx(want, rel=1e-12)
    # the quoted value: S=1/2, beta=1, theta=pi/2 -> cosh(1)
    assert single_spin_diagonal_element(1, 1.0, np.pi / 2) == pytest.approx(
        np.cosh(1.0), rel=1e-7
    )


def test_sandwich_beta_zero_slack():
    spec = orbital_compass(SpinMagnitude(2), build_torus(2, 2, 1))
    H = build_quantum_hamiltonian(spec, frame="rp")
    ens = gibbs(H, 0.0)
    rng = np.random.default_rng(1)
    cfg = sample_sphere(rng, spec.geometry.n_sites)
    rep = sandwich_check(ens, spec, cfg)
    assert rep["lower_slack"] == pytest.approx(0.0, abs=1e-10)


def test_sandwich_lower_slack_nonnegative():
    rng = np.random.default_rng(2)
    for builder in [
        lambda S: heisenberg(S, build_torus(2, 2, 1), 0.5, 0.25),
        lambda S: orbital_compass(S, build_torus(2, 2, 1)),
    ]:
        for twoS in [1, 4]:
            S = SpinMagnitude(twoS)
            spec = builder(S)
            H = build_quantum_hamiltonian(spec, frame="rp")
            base = gibbs(H, 1.0)
            for _ in range(20):
                beta = rng.uniform(0.0, np.sqrt(S.S))
                ens = replace(base, beta=beta)
                cfg = sample_sphere(rng, spec.geometry.n_sites)
                rep = sandwich_check(ens, spec, cfg)
                assert rep["lower_slack"] >= -1e-10


def test_full_bound_beta_zero_overlap_bound():
    spec = orbital_compass(SpinMagnitude(4), build_torus(2, 2, 1))
    H = build_quantum_hamiltonian(spec, frame="rp")
    ens = gibbs(H, 0.0)
    rng = np.random.default_rng(3)
    for _ in range(20):
        a = sample_sphere(rng, spec.geometry.n_sites)
        b = sample_sphere(rng, spec.geometry.n_sites)
        rep = full_bound_check(ens, spec, a, b)
        # at beta = 0: log|<O|O'>| + eta d <= 0
        assert rep["log_element"] + 0.25 * rep["mixed_distance"] <= 1e-10


def test_kappa_sweep_scaling_window():
    fit = kappa_sweep(twoS_values=(1, 2, 4, 8, 16), quad_degree=20)
    assert all(k > 0 for k in fit.kappa_means)
    assert -0.7 <= fit.exponent <= -0.3
    ratio = fit.kappa_means[0] / fit.kappa_means[-1]
    assert 2.8 <= ratio <= 5.7


def test_offdiagonal_mean_below_twice_diagonal_fit():
    fit = kappa_sweep(twoS_values=(1, 2, 4, 8), quad_degree=16)
    rows = offdiagonal_excess_means(fit, samples=150, seed=5)
    for row in rows:
        assert row["mean"] <= 2.0 * fit.fitted(row["S"]) + 1e-12


def test_berezin_lieb_two_site():
    spec = heisenberg(HALF, CHAIN2, 0.3, 0.2)
    for beta in [0.1, 1.0, 5.0]:
        rep = berezin_lieb_check(spec, beta, quad_degree=40)
        assert rep["slack_lower"] >= -1e-8
        assert rep["slack_upper"] >= -1e-8
    rep0 = berezin_lieb_check(spec, 1e-12, quad_degree=16)
    assert rep0["log_lower"] == pytest.approx(0.0, abs=1e-9)
    assert rep0["log_mid"] == pytest.approx(0.0, abs=1e-9)
    assert rep0["log_upper"] == pytest.approx(0.0, abs=1e-9)


def test_berezin_lieb_single_spin_closed_form():
    for twoS in [1, 2, 8]:
        for beta in [0.1, 1.0, 4.0]:
            rep = single_spin_field_check(twoS, beta)
            assert rep["lower"] <= rep["mid"] * (1 + 1e-12)
            assert rep["mid"] <= rep["upper"] * (1 + 1e-12)
    # S = 1/2: Z/(2S+1) = cosh(beta) vs sinh(beta)/beta
    rep = single_spin_field_check(1, 1.0)
    assert rep["mid"] == pytest.approx(np.cosh(1.0), rel=1e-12)
    assert rep["lower"] == pytest.approx(np.sinh(1.0), rel=1e-12)


def test_qhat_full_event_is_identity():
    S = HALF
    geom = CHAIN2
    est = q_hat(S, geom, full_event(), samples=4000, seed=7)
    err = est.operator - np.eye(S.dim**2)
    assert matrix_within_sigma(err, est.sigma)


def test_qhat_complement_sums_to_identity():
    S = HALF
    geom = CHAIN2
    ev = cap_event([0, 0, 1], 1.2, "cap")
    a = q_hat(S, geom, ev, samples=4000, seed=8)
    b = q_hat(
        S,
        geom,
        complement_site_event(ev),
        samples=4000,
        seed=9,
    )
    err = a.operator + b.operator - np.eye(S.dim**2)
    sig = np.hypot(a.sigma, b.sigma)
    assert matrix_within_sigma(err, sig)


def test_qhat_single_spin_cap_diagonal_oracle():
    S = HALF
    est = single_site_q_hat(S, lambda v: v[:, 2] > 0.0, samples=200000, seed=10)
    # closed form for the hemisphere at S=1/2: diag(1/4, 3/4) in M=-S..S order
    want = np.diag([0.25, 0.75])
    assert matrix_within_sigma(est.operator - want, est.sigma)
    # general 1d-quadrature oracle for a smaller cap
    kappa = 0.9
    est2 = single_site_q_hat(
        S, lambda v: v[:, 2] >= np.cos(kappa), samples=200000, seed=11
    )
    x, w = np.polynomial.legendre.leggauss(60)
    t = (x + 1) / 2 * kappa
    wt = w * kappa / 2
    dens = np.sin(t)
    amps = coherent_amplitudes(S.twoS, t, np.zeros_like(t))
    diag = S.dim * 0.5 * ((np.abs(amps) ** 2 * (wt * dens)[:, None]).sum(0))
    err2 = np.diag(est2.operator) - diag
    assert matrix_within_sigma(err2, np.diag(est2.sigma))


def test_qhat_monotone_in_event():
    S = HALF
    big = single_site_q_hat(S, lambda v: v[:, 2] > -0.5, samples=60000, seed=12)
    small = single_site_q_hat(S, lambda v: v[:, 2] > 0.5, samples=60000, seed=12)
    diff = big.operator - small.operator
    w = np.linalg.eigvalsh((diff + diff.conj().T) / 2)
    assert w.min() >= -3 * float(np.hypot(big.sigma, small.sigma).max())


def test_qhat_disjoint_blocks_commute():
    S = HALF
    geom = build_torus(1, 4, 1)
    ev = cap_event([0, 0, 1], 1.3)
    a = q_hat(S, geom, ev, samples=3000, seed=13)
    # place the same event at block 2 by translation: exact construction via
    # dissemination is not needed; just check the sampled operator at block 0
    # commutes with an exactly-built far-block operator
    from spinboard.su2kit import embed_operator

    proj = np.diag([0.2, 0.8]).astype(complex)
    far = embed_operator(proj, [2], 4, 2)
    comm = a.operator @ far - far @ a.operator
    assert np.abs(comm).max() <= 3 * a.sigma.max() + 1e-9


def test_chessboard_quantum_small():
    spec = heisenberg(HALF, build_torus(1, 4, 1), 0.2, 0.3)
    rng = np.random.default_rng(14)
    ax = [np.array([np.sin(a), 0.0, np.cos(a)]) for a in rng.uniform(0, np.pi, 2)]
    events = {
        0: cap_event(ax[0], 1.9, "cap0"),
        2: cap_event(ax[1], 2.1, "cap2"),
    }
    rep = chessboard_check_quantum(spec, beta=1.0, events=events, samples=20000, seed=15)
    assert rep["margin"] >= -3 * rep["sigma"]


def test_chessboard_quantum_trivial_cases():
    spec = heisenberg(HALF, build_torus(1, 4, 1), 0.0, 0.0)
    # all events = full space: both sides 1ted
    events = {t: full_event() for t in range(4)}
    rep = chessboard_check_quantum(spec, beta=0.7, events=events, samples=8000, seed=16)
    assert rep["lhs"] == pytest.approx(1.0, abs=5e-2)
    assert rep["rhs"] == pytest.approx(1.0, abs=5e-2)
    # single event already disseminated over all blocks: equality
    ev = cap_event([0, 0, 1], 2.2)
    events = {t: ev for t in range(4)}
    rep = chessboard_check_quantum(spec, beta=0.7, events=events, samples=30000, seed=17)
    assert abs(rep["lhs"] - rep["rhs"]) <= 3 * rep["sigma"]
