"""Configuration-driven suite runner.

A suite is a predefined list of independent tasks (one per model / S / beta
cell where that makes sense); tasks run serially or in a process pool and
their records are written in task order to one CSV table per suite plus a
JSON-lines ledger (one record per check: inputs, value, slack, sigma,
pass/fail).  Reruns with the same config and seed produce byte-identical
ledgers.  The exit status is nonzero iff any hard check fails.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

SUITE_NAMES = (
    "coherent",
    "symbols",
    "sandwich",
    "berezin",
    "chessboard-q",
    "chessboard-c",
    "frakp",
    "contours",
    "entropy",
    "spinwave",
    "scan",
)


@dataclass(frozen=True)
class RunConfig:
    suite: str
    seed: int = 0
    out: str = "out"
    jobs: int = 1
    tolerance_scale: float = 1.0
    params: dict = field(default_factory=dict)

    def to_toml(self) -> str:
        buf = io.StringIO()
        buf.write("[run]\n")
        buf.write(f'suite = "{self.suite}"\n')
        buf.write(f"seed = {self.seed}\n")
        buf.write(f'out = "{self.out}"\n')
        buf.write(f"jobs = {self.jobs}\n")
        buf.write(f"tolerance_scale = {self.tolerance_scale!r}\n")
        if self.params:
            buf.write("\n[params]\n")
            for k in sorted(self.params):
                v = self.params[k]
                if isinstance(v, str):
                    buf.write(f'{k} = "{v}"\n')
                elif isinstance(v, bool):
                    buf.write(f"{k} = {str(v).lower()}\n")
                elif isinstance(v, (list, tuple)):
                    buf.write(f"{k} = [{', '.join(repr(float(x)) for x in v)}]\n")
                elif isinstance(v, int):
                    buf.write(f"{k} = {v}\n")
                else:
                    buf.write(f"{k} = {float(v)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_toml(cls, text: str) -> "RunConfig":
        import tomli

        data = tomli.loads(text)
        unknown = set(data) - {"run", "params"}
        if unknown:
            raise ValueError(f"unknown config tables: {sorted(unknown)}")
        run_tbl = data.get("run", {})
        known = {"suite", "seed", "out", "jobs", "tolerance_scale"}
        bad = set(run_tbl) - known
        if bad:
            raise ValueError(f"unknown run keys: {sorted(bad)}")
        return cls(
            suite=run_tbl["suite"],
            seed=int(run_tbl.get("seed", 0)),
            out=str(run_tbl.get("out", "out")),
            jobs=int(run_tbl.get("jobs", 1)),
            tolerance_scale=float(run_tbl.get("tolerance_scale", 1.0)),
            params=dict(data.get("params", {})),
        )

    def scientific_toml(self) -> str:
        """Canonical serialization of the result-determining fields only
        (output directory and worker count do not change any number)."""
        return replace(self, out="out", jobs=1).to_toml()

    def content_hash(self) -> str:
        return hashlib.sha256(self.scientific_toml().encode()).hexdigest()[:16]

    def content_id(self) -> str:
        """Git-style blob id of the canonical serialized config."""
        blob = self.scientific_toml().encode()
        return hashlib.sha1(b"blob %d\0" % len(blob) + blob).hexdigest()


def _rec(check, passed, value, slack=None, sigma=None, model="", S="", beta="", **extra):
    rec = {
        "check": check,
        "model": model,
        "S": S,
        "beta": beta,
        "value": value,
        "slack": slack,
        "sigma": sigma,
        "passed": bool(passed),
    }
    rec.update(extra)
    return rec


# ---------------------------------------------------------------------------
# tasks: top-level picklable callables returning lists of records


def task_coherent_one_S(p, seed, tol):
    from .su2kit import (
        SpinMagnitude,
        build_spin_operators,
        coherent_amplitudes,
        config_angles,
        sample_sphere,
    )

    twoS = int(p["twoS"])
    n = int(p.get("n_random", 1000))
    S = SpinMagnitude(twoS)
    ops = build_spin_operators(S)
    rng = np.random.default_rng(seed)
    v = sample_sphere(rng, n)
    th, ph = config_angles(v)
    amps = coherent_amplitudes(twoS, th, ph)
    acted = (
        v[:, :1] * (amps @ ops.Sx.T)
        + v[:, 1:2] * (amps @ ops.Sy.T)
        + v[:, 2:3] * (amps @ ops.Sz.T)
    )
    worst_eig = float(np.linalg.norm(acted - S.S * amps, axis=1).max())
    va, vb = sample_sphere(rng, n), sample_sphere(rng, n)
    ta, pa = config_angles(va)
    tb, pb = config_angles(vb)
    aa = coherent_amplitudes(twoS, ta, pa)
    bb = coherent_amplitudes(twoS, tb, pb)
    got = np.abs(np.einsum("ni,ni->n", aa.conj(), bb))
    cos_half = np.sqrt((1 + np.einsum("ni,ni->n", va, vb)) / 2)
    worst_ov = float(np.abs(got - cos_half**twoS).max())
    return [
        _rec("eigenvector_residual", worst_eig < 1e-10 * tol, worst_eig, S=S.S),
        _rec("overlap_magnitude", worst_ov < 1e-12 * tol, worst_ov, S=S.S),
    ]


def task_symbols_one_S(p, seed, tol):
    from .su2kit import SpinMagnitude, coherent_amplitudes
    from .symbols import quantize, sphere_quadrature, upper_symbol

    twoS = int(p["twoS"])
    n_ops = int(p.get("n_operators", 100))
    S = SpinMagnitude(twoS)
    rng = np.random.default_rng(seed)
    quad = sphere_quadrature(2 * twoS + 8)
    amps = coherent_amplitudes(twoS, quad.theta, quad.phi)
    R = (S.dim / (4 * np.pi)) * np.einsum("i,ia,ib->ab", quad.weights, amps, amps.conj())
    res = float(np.abs(R - np.eye(S.dim)).max())
    worst_tr = 0.0
    worst_rt = 0.0
    for _ in range(n_ops):
        A = rng.normal(size=(S.dim, S.dim)) + 1j * rng.normal(size=(S.dim, S.dim))
        low = np.einsum("ia,ab,ib->i", amps.conj(), A, amps)
        tr = (S.dim / (4 * np.pi)) * quad.integrate(low)
        worst_tr = max(worst_tr, abs(tr - np.trace(A)))
        Ah = (A + A.conj().T) / 2
        worst_rt = max(worst_rt, float(np.abs(quantize(upper_symbol(Ah, S), S) - Ah).max()))
    return [
        _rec("resolution_identity", res < 1e-8 * tol, res, S=S.S),
        _rec("trace_formula", worst_tr < 1e-8 * tol, worst_tr, S=S.S),
        _rec("quantize_round_trip", worst_rt < 1e-9 * tol, worst_rt, S=S.S),
    ]


def task_sandwich_system(p, seed, tol):
    from dataclasses import replace as dc_replace

    from .models import build_quantum_hamiltonian, heisenberg, orbital_compass
    from .quantum_lab import gibbs, sandwich_check
    from .su2kit import SpinMagnitude, sample_sphere
    from .torus import build_torus

    rng = np.random.default_rng(seed)
    S = SpinMagnitude(int(p["twoS"]))
    g = build_torus(2, 2, 1)
    if p["model"] == "heisenberg_af":
        spec = heisenberg(S, g, 0.5, 0.25)
    else:
        spec = orbital_compass(S, g)
    base = gibbs(build_quantum_hamiltonian(spec, frame="rp"), 1.0)
    worst = np.inf
    for _ in range(int(p.get("n_random", 250))):
        ens = dc_replace(base, beta=rng.uniform(0.0, np.sqrt(S.S)))
        worst = min(
            worst, sandwich_check(ens, spec, sample_sphere(rng, g.n_sites))["lower_slack"]
        )
    return [
        _rec("lower_slack_min", worst >= -1e-10 * tol, worst, model=p["model"], S=S.S)
    ]


def task_kappa_fit(p, seed, tol):
    from .quantum_lab import kappa_sweep, offdiagonal_excess_means

    twoS_values = tuple(int(2 * s) for s in p.get("S_values", [0.5, 1, 2, 4, 8]))
    fit = kappa_sweep(twoS_values=twoS_values)
    out = [
        _rec(
            "kappa_exponent",
            -0.7 <= fit.exponent <= -0.3,
            fit.exponent,
            model="orbital_compass_2d",
            c3=fit.c3,
        )
    ]
    rows = offdiagonal_excess_means(fit, samples=int(p.get("offdiag_samples", 300)), seed=seed)
    worst_off = max(r["mean"] - 2.0 * fit.fitted(r["S"]) for r in rows)
    out.append(
        _rec("offdiagonal_vs_fit", worst_off <= 0.0, worst_off, model="orbital_compass_2d")
    )
    for s, b, k in zip(fit.S_values, fit.betas, fit.kappa_means):
        out.append(
            _rec("kappa_mean", k > 0, k, model="orbital_compass_2d", S=s, beta=b, hard=False)
        )
    return out


def task_berezin_beta(p, seed, tol):
    from .models import heisenberg
    from .quantum_lab import berezin_lieb_check, single_spin_field_check
    from .su2kit import SpinMagnitude
    from .torus import build_torus

    beta = float(p["beta"])
    rep = single_spin_field_check(1, beta)
    ok1 = rep["lower"] <= rep["mid"] * (1 + 1e-12) <= rep["upper"] * (1 + 1e-12) ** 2
    spec = heisenberg(SpinMagnitude(1), build_torus(1, 2, 1), 0.3, 0.2)
    rep2 = berezin_lieb_check(spec, beta, quad_degree=48)
    ok2 = rep2["slack_lower"] >= -1e-8 * tol and rep2["slack_upper"] >= -1e-8 * tol
    return [
        _rec("single_spin_sandwich", ok1, rep["mid"], model="z_field", S=0.5, beta=beta),
        _rec(
            "two_site_sandwich",
            ok2,
            rep2["log_mid"],
            slack=min(rep2["slack_lower"], rep2["slack_upper"]),
            model="heisenberg_af",
            S=0.5,
            beta=beta,
        ),
    ]


def task_chessboard_q(p, seed, tol):
    from .models import heisenberg
    from .quantum_lab import chessboard_check_quantum
    from .su2kit import SpinMagnitude
    from .torus import build_torus, cap_event

    rng = np.random.default_rng(seed)
    spec = heisenberg(SpinMagnitude(1), build_torus(1, 4, 1), 0.2, 0.3)
    angles = rng.uniform(0.0, np.pi, 2)
    caps = rng.uniform(1.6, 2.3, 2)
    events = {
        0: cap_event([np.sin(angles[0]), 0, np.cos(angles[0])], caps[0], "cap0"),
        2: cap_event([np.sin(angles[1]), 0, np.cos(angles[1])], caps[1], "cap2"),
    }
    rep = chessboard_check_quantum(
        spec,
        beta=float(p.get("beta", 1.0)),
        events=events,
        samples=int(p.get("samples", 100000)),
        seed=seed,
    )
    return [
        _rec(
            "quantum_chessboard",
            rep["margin"] >= -3 * rep["sigma"] * tol,
            rep["margin"],
            sigma=rep["sigma"],
            model="heisenberg_af",
            S=0.5,
            beta=p.get("beta", 1.0),
            lhs=rep["lhs"],
            rhs=rep["rhs"],
        )
    ]


def task_chessboard_c_beta(p, seed, tol):
    from .classical_mc import (
        _site_probability,
        chessboard_check_classical,
        frakp_beta_zero_exact,
    )
    from .models import heisenberg
    from .su2kit import SpinMagnitude
    from .torus import build_torus, cap_event

    g = build_torus(2, 4, 2)
    spec = heisenberg(SpinMagnitude(1), g, 0.3, 0.1)
    rng = np.random.default_rng(seed ^ 0xC0FFEE)
    a = rng.uniform(0.0, np.pi, 2)
    e1 = cap_event([np.sin(a[0]), 0, np.cos(a[0])], 2.0, "c1")
    e2 = cap_event([np.sin(a[1]), 0, np.cos(a[1])], 2.1, "c2")
    events = {g.block_index((0, 0)): e1, g.block_index((1, 1)): e2}
    beta = float(p["beta"])
    if beta == 0.0:
        lhs = (_site_probability(e1) * _site_probability(e2)) ** g.block_volume
        rhs = frakp_beta_zero_exact(e1, g) * frakp_beta_zero_exact(e2, g)
        return [
            _rec(
                "classical_chessboard_exact0",
                abs(lhs - rhs) < 1e-12,
                rhs - lhs,
                beta=beta,
                model="heisenberg_af",
            )
        ]
    rep = chessboard_check_classical(
        spec,
        beta,
        events,
        seed=seed,
        sweeps=int(p.get("sweeps", 2000)),
        frakp_kw=dict(replicas=3, n_grid=10, sweeps=250),
    )
    return [
        _rec(
            "classical_chessboard",
            rep["margin"] >= -3 * rep["sigma"] * tol,
            rep["margin"],
            sigma=rep["sigma"],
            beta=beta,
            model="heisenberg_af",
            lhs=rep["lhs"],
            rhs=rep["rhs"],
        )
    ]


def task_frakp(p, seed, tol):
    from .classical_mc import (
        estimate_frakp,
        frakp_beta_zero_exact,
        transfer_integral_frakp,
    )
    from .models import heisenberg
    from .su2kit import SpinMagnitude
    from .torus import build_torus, cap_event

    kappa = float(p.get("kappa", 1.0))
    g = build_torus(2, 4, 2)
    spec = heisenberg(SpinMagnitude(1), g)
    ev = cap_event([0, 0, 1], kappa, "G+")
    closed = ((1 - np.cos(kappa)) / 2) ** g.block_volume
    est0 = estimate_frakp(spec, 0.0, ev, seed=seed, replicas=2, n_grid=4, sweeps=60)
    ok0 = (
        abs(frakp_beta_zero_exact(ev, g) - closed) < 1e-12
        and abs(est0.p_hat - closed) < 1e-9
    )
    chain = build_torus(1, 8, 1)
    spec1 = heisenberg(SpinMagnitude(1), chain, 0.0, 0.0)
    beta = float(p.get("beta", 1.0))
    oracle = transfer_integral_frakp(spec1, beta, ev)
    est = estimate_frakp(spec1, beta, ev, seed=seed + 1, replicas=4, n_grid=16, sweeps=500)
    rel = abs(est.p_hat - oracle) / oracle
    return [
        _rec("beta0_closed_form", ok0, est0.p_hat, model="heisenberg_af", beta=0.0),
        _rec(
            "transfer_integral_match",
            rel < 0.02 * tol,
            rel,
            sigma=est.sigma,
            model="heisenberg_af",
            beta=beta,
            oracle=oracle,
            estimate=est.p_hat,
        ),
    ]


def task_contours_side(p, seed, tol):
    import itertools

    from .torus import build_torus, enumerate_contours, peierls_sum

    side = int(p["side"])
    q = float(p.get("q", 0.01))
    g = build_torus(2, 2 * side, 2)
    got = enumerate_contours(g, (0, 0), (1, 0), cap=max(4**g.d, side**2))
    coords = list(itertools.product(range(side), repeat=2))
    index = {c: i for i, c in enumerate(coords)}

    def neighbors(i):
        acc = set()
        for j in range(2):
            for step in (1, -1):
                cc = list(coords[i])
                cc[j] = (cc[j] + step) % side
                acc.add(index[tuple(cc)])
        acc.discard(i)
        return acc

    def connected(sub):
        if not sub:
            return False
        seen = {next(iter(sub))}
        stack = list(seen)
        while stack:
            for nb in neighbors(stack.pop()):
                if nb in sub and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == len(sub)

    nsup = side * side
    i2 = index[(1, 0)]
    want = []
    for bits in range(1, 2**nsup):
        sub = frozenset(i for i in range(nsup) if bits >> i & 1)
        if 0 not in sub or i2 in sub:
            continue
        if connected(sub) and connected(frozenset(range(nsup)) - sub):
            want.append(sub)
    want = sorted(want, key=lambda s: (len(s), tuple(sorted(s))))

    def brute_boundary(sub):
        edges = 0
        for i in sub:
            for j in range(2):
                for step in (1, -1):
                    cc = list(coords[i])
                    cc[j] = (cc[j] + step) % side
                    if index[tuple(cc)] not in sub:
                        edges += 1
        return edges

    brute = sum(2 * (4 * q) ** (brute_boundary(s) / 8) for s in want)
    ps = peierls_sum(g, (0, 0), (1, 0), q, cap=max(16, side**2))
    qs = np.linspace(0.0, 0.25, 6)
    vals = [peierls_sum(g, (0, 0), (1, 0), qq, cap=max(16, side**2)) for qq in qs]
    return [
        _rec(f"enumeration_{side}x{side}", [c.sites for c in got] == want, len(got)),
        _rec(f"peierls_sum_{side}x{side}", abs(ps - brute) < 1e-12, ps, slack=ps - brute),
        _rec(
            f"peierls_monotone_{side}x{side}",
            all(b >= a for a, b in zip(vals, vals[1:])),
            vals[-1],
        ),
    ]


def task_entropy(p, seed, tol):
    import itertools

    from .models import block_edges, bond_pattern_stats, entropy_bound_constants, entropy_profile

    out = []
    prof = entropy_profile(int(p.get("p", 16)))
    s = np.linspace(0.0, 50.0, 2001)
    gap = float(np.abs(prof.A(s) - prof.limit_A(s)).max())
    out.append(_rec("power_mean_limit_gap", gap < 0.1, gap, model="power_mean"))
    eb = entropy_bound_constants(2, 0.15, 0.2, 1.0, A_p_t=0.9)
    out.append(_rec("Delta_hand_value", abs(eb.Delta - 0.25 + 0.15 / 0.9) < 1e-9, eb.Delta))
    out.append(_rec("Delta_prime_infeasible", eb.Delta_prime < 0, eb.Delta_prime))
    for d in (2, 3):
        a_d = d * 2 ** (d - 1)
        ok = True
        worst = np.inf
        for bits in itertools.product([False, True], repeat=len(block_edges(d))):
            if all(bits) or not any(bits):
                continue
            f_b, f_s = bond_pattern_stats(d, bits)
            margin = f_b - f_s - 1.0 / a_d
            worst = min(worst, margin)
            ok = ok and margin >= -1e-12
        out.append(_rec(f"bond_pattern_d{d}", ok, worst))
    return out


def task_spinwave_values(p, seed, tol):
    from math import comb, log, pi, sqrt

    from .spinwave import f_infinite, minimize_f

    out = []
    fx = f_infinite(0.0)
    out.append(_rec("F_axis_zero", abs(fx) < 1e-3 * tol, fx, model="compass_sw"))
    G = pi / 8 * log(2 + sqrt(3)) + 3.0 / 8 * sum(
        1.0 / (comb(2 * n, n) * (2 * n + 1) ** 2) for n in range(60)
    )
    target = 0.5 * (4 * G / pi - log(2))
    f45 = f_infinite(np.pi / 4)
    out.append(
        _rec("F_45_catalan", abs(f45 - target) < 5e-3 * tol, f45, slack=f45 - target)
    )
    rep = minimize_f(resolution_deg=float(p.get("resolution_deg", 1.0)))
    ok = set(np.round(rep["argmin_degrees"], 6)) == {0.0, 90.0} and rep["interior_gap"] > 0
    out.append(_rec("F_argmin_axes", ok, rep["interior_gap"]))
    for deg, val in zip(rep["degrees"], rep["values"]):
        out.append(
            _rec("F_grid_point", True, float(val), model="compass_sw", theta_star_deg=float(deg), hard=False)
        )
    return out


def task_spinwave_mc(p, seed, tol):
    from .spinwave import f_infinite, f_mc_direct

    beta = float(p.get("mc_beta", 1.5e6))
    Delta = float(p.get("mc_delta", 0.004))
    L = int(p.get("mc_L", 16))
    a = f_mc_direct(L, Delta, beta, 0.0, seed=seed, sweeps=400, replicas=2, n_grid=24)
    b = f_mc_direct(L, Delta, beta, np.pi / 4, seed=seed + 1, sweeps=400, replicas=2, n_grid=24)
    f45 = f_infinite(np.pi / 4)
    diff = b.value - a.value
    rel = abs(diff - f45) / f45
    return [
        _rec(
            "mc_cross_validation",
            rel < 0.25 * tol and a.regime_ok and b.regime_ok,
            rel,
            sigma=float(np.hypot(a.sigma, b.sigma)),
            beta=beta,
            model="compass_sw",
            diff=diff,
        )
    ]


def task_scan_heisenberg(p, seed, tol):
    from .classical_mc import beta_scan, good_event_family
    from .models import heisenberg
    from .su2kit import SpinMagnitude
    from .torus import build_torus

    L = int(p.get("L", 16))
    g = build_torus(2, L, 1)
    spec = heisenberg(SpinMagnitude(1), g, 0.0, 0.0)
    ev = good_event_family(spec, kappa=float(p.get("kappa", 0.3)))
    betas = [0.1, 0.4, 0.7, 0.9, 1.1, 1.3, 1.6, 2.0, 2.5, 3.0, 4.0, 5.0]
    scans = beta_scan(spec, betas, ev, seed=seed, sweeps=int(p.get("sweeps", 1500)))
    rise = scans[-1].good_fraction - scans[0].good_fraction
    out = [_rec("heisenberg_good_rise", rise >= 0.5, rise, model="heisenberg_af", beta=5.0)]
    for c in scans:
        out.append(
            _rec(
                "scan_point",
                True,
                c.energy_density,
                sigma=c.energy_sigma,
                model="heisenberg_af",
                beta=c.beta,
                good_fraction=c.good_fraction,
                bad_fraction=c.bad_fraction,
                adjacent_distinct=c.adjacent_distinct_good,
                hard=False,
            )
        )
    return out


def task_scan_compass(p, seed, tol):
    from .classical_mc import mc_state, spearman_rho, sweep
    from .models import orbital_compass
    from .su2kit import SpinMagnitude
    from .torus import build_torus

    L = int(p.get("L", 16))
    spec = orbital_compass(SpinMagnitude(1), build_torus(2, L, 2))
    betas = [1.0, 2.0, 4.0, 7.0, 12.0, 20.0, 32.0, 50.0]
    state = mc_state(spec, betas[0], seed)
    sweep(state, 300)
    order = []
    for beta in betas:
        state.beta = beta
        sweep(state, 400)
        acc = []
        for _ in range(60):
            sweep(state, 3)
            c = state.config
            acc.append(float((c[:, 0] ** 2 + c[:, 2] ** 2).mean()))
        order.append(float(np.mean(acc)))
    rho = spearman_rho(betas, order)
    out = [_rec("compass_order_spearman", rho > 0.9, rho, model="orbital_compass_2d")]
    for beta, o in zip(betas, order):
        out.append(
            _rec("scan_point", True, o, model="orbital_compass_2d", beta=beta, hard=False)
        )
    return out


def task_scan_large_entropy(p, seed, tol):
    from .classical_mc import beta_scan, good_event_family, jump_statistic
    from .models import nonlinear_xy
    from .su2kit import SpinMagnitude
    from .torus import build_torus

    L = int(p.get("L", 16))
    spec = nonlinear_xy(SpinMagnitude(1), build_torus(2, L, 2), p=int(p.get("p", 16)))
    ev = good_event_family(spec, b=float(p.get("b", 0.15)))
    betas = list(np.linspace(0.5, 4.0, 40))
    scans = beta_scan(spec, betas, ev, seed=seed, sweeps=500)
    js = jump_statistic(scans)
    out = [_rec("large_entropy_jump", js >= 5.0, js, model="nonlinear_xy")]
    for c in scans:
        out.append(
            _rec(
                "scan_point",
                True,
                c.energy_density,
                sigma=c.energy_sigma,
                model="nonlinear_xy",
                beta=c.beta,
                good_fraction=c.good_fraction,
                bad_fraction=c.bad_fraction,
                hard=False,
            )
        )
    return out


TASKS = {
    "coherent_one_S": task_coherent_one_S,
    "symbols_one_S": task_symbols_one_S,
    "sandwich_system": task_sandwich_system,
    "kappa_fit": task_kappa_fit,
    "berezin_beta": task_berezin_beta,
    "chessboard_q": task_chessboard_q,
    "chessboard_c_beta": task_chessboard_c_beta,
    "frakp": task_frakp,
    "contours_side": task_contours_side,
    "entropy": task_entropy,
    "spinwave_values": task_spinwave_values,
    "spinwave_mc": task_spinwave_mc,
    "scan_heisenberg": task_scan_heisenberg,
    "scan_compass": task_scan_compass,
    "scan_large_entropy": task_scan_large_entropy,
}


def suite_tasks(config: RunConfig):
    """The (task_name, params) list for a suite, with config overrides merged."""
    p = dict(config.params)
    name = config.suite
    if name == "coherent":
        return [("coherent_one_S", {**p, "twoS": t}) for t in range(1, int(p.get("twoS_max", 16)) + 1)]
    if name == "symbols":
        return [("symbols_one_S", {**p, "twoS": t}) for t in range(1, int(p.get("twoS_max", 8)) + 1)]
    if name == "sandwich":
        cells = [
            ("sandwich_system", {**p, "model": m, "twoS": t})
            for m in ("heisenberg_af", "orbital_compass_2d")
            for t in (1, 4)
        ]
        return cells + [("kappa_fit", p)]
    if name == "berezin":
        return [("berezin_beta", {**p, "beta": b}) for b in p.get("betas", [0.1, 0.3, 1.0, 3.0, 10.0])]
    if name == "chessboard-q":
        return [("chessboard_q", p)]
    if name == "chessboard-c":
        return [("chessboard_c_beta", {**p, "beta": b}) for b in p.get("betas", [0.0, 1.0, 5.0])]
    if name == "frakp":
        return [("frakp", p)]
    if name == "contours":
        return [("contours_side", {**p, "side": s}) for s in range(2, int(p.get("max_side", 3)) + 1)]
    if name == "entropy":
        return [("entropy", p)]
    if name == "spinwave":
        return [("spinwave_values", p), ("spinwave_mc", p)]
    if name == "scan":
        return [("scan_heisenberg", p), ("scan_compass", p), ("scan_large_entropy", p)]
    raise ValueError(f"unknown suite {name!r}; available: {', '.join(SUITE_NAMES)}")


def suite(name: str) -> RunConfig:
    """Predefined configuration for a named suite."""
    if name not in SUITE_NAMES:
        raise ValueError(f"unknown suite {name!r}; available: {', '.join(SUITE_NAMES)}")
    return RunConfig(suite=name)


def _run_task(item):
    name, params, seed, tol = item
    return TASKS[name](params, seed, tol)


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    if isinstance(x, (np.integer,)):
        return str(int(x))
    if x is None:
        return ""
    return str(x)


def run(config: RunConfig) -> int:
    """Execute the suite; write the CSV table and ledger; return exit status."""
    tasks = suite_tasks(config)
    items = [
        (name, params, config.seed + 1000 * i, config.tolerance_scale)
        for i, (name, params) in enumerate(tasks)
    ]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            chunks = list(pool.map(_run_task, items))
    else:
        chunks = [_run_task(it) for it in items]
    records = [rec for chunk in chunks for rec in chunk]

    out_dir = config.out or os.environ.get("SPINBOARD_OUT", "out")
    os.makedirs(out_dir, exist_ok=True)
    chash = config.content_hash()
    cid = config.content_id()
    for i, rec in enumerate(records):
        rec["suite"] = config.suite
        rec["seed"] = config.seed
        rec["config_hash"] = chash
        rec["config_id"] = cid
        rec["index"] = i

    ledger_path = os.path.join(out_dir, f"{config.suite}-ledger.jsonl")
    with open(ledger_path, "w") as fh:
        for rec in records:
            clean = {k: (_fmt(v) if isinstance(v, (float, np.floating)) else v) for k, v in rec.items()}
            fh.write(json.dumps(clean, sort_keys=True, default=_fmt) + "\n")

    csv_path = os.path.join(out_dir, f"{config.suite}.csv")
    base_cols = ["suite", "index", "check", "model", "S", "beta", "value", "slack", "sigma", "passed"]
    extra = sorted(
        {k for r in records for k in r} - set(base_cols) - {"seed", "config_hash", "config_id"}
    )
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(base_cols + extra)
        for rec in records:
            w.writerow([_fmt(rec.get(k)) for k in base_cols + extra])

    failures = [r for r in records if not r["passed"] and r.get("hard", True)]
    for r in records:
        if not r.get("hard", True):
            continue  # data rows (scan curves, F-grid points) stay in the CSV
        status = "pass" if r["passed"] else "FAIL"
        print(f"[{status}] {config.suite}.{r['check']} value={_fmt(r['value'])}")
    return 1 if failures else 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="spinboard", description="desk-scale verification suites"
    )
    ap.add_argument("--config", help="TOML run configuration")
    ap.add_argument("--suite", help=f"suite name ({', '.join(SUITE_NAMES)})")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default=None)
    ap.add_argument("--jobs", type=int, default=None)
    ap.add_argument("--tolerance-scale", type=float, default=None)
    args = ap.parse_args(argv)
    if args.config:
        with open(args.config) as fh:
            config = RunConfig.from_toml(fh.read())
    elif args.suite:
        config = suite(args.suite)
    else:
        ap.error("need --config or --suite")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    elif config.out == "out" and os.environ.get("SPINBOARD_OUT"):
        overrides["out"] = os.environ["SPINBOARD_OUT"]
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.tolerance_scale is not None:
        overrides["tolerance_scale"] = args.tolerance_scale
    if overrides:
        config = replace(config, **overrides)
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
