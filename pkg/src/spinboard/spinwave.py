"""Spin-wave free energies on the square lattice and their MC cross-checks.

The Gaussian dispersion D_k(w) = w_z^2 |1-e^{ik1}|^2 + w_x^2 |1-e^{ik2}|^2
has an integrable log singularity at k = 0; every zero-regularization here
goes through lambda-regularized lattice sums followed by extrapolation of the
ladder lambda -> 0 (direct quadrature of the singular integrand is
deliberately not offered).  The k1 direction of a lattice sum can be resummed
exactly through the Chebyshev product identity

    prod_j (a - 2b cos(2 pi j / L)) = b^L (tau^L + tau^-L - 2),
    tau = (a + sqrt(a^2 - 4 b^2)) / (2b),

which removes one lattice dimension at lambda > 0 and makes large effective
lattices cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import ModelSpec, classical_energy, orbital_compass
from .su2kit import SpinMagnitude
from .torus import build_torus

LAMBDA_LADDER = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5)


@dataclass(frozen=True)
class SpinWaveSpec:
    """Direction on the first quadrant of the xz great circle plus scales."""

    theta_star: float  # w = (cos t*, 0, sin t*)
    lam: float = 0.0
    Delta: float = 0.0
    L: int = 0

    @property
    def w(self) -> np.ndarray:
        return np.array([np.cos(self.theta_star), 0.0, np.sin(self.theta_star)])

    @property
    def wx2(self) -> float:
        return float(np.cos(self.theta_star) ** 2)

    @property
    def wz2(self) -> float:
        return float(np.sin(self.theta_star) ** 2)


def dhat(k, w) -> np.ndarray:
    """w_z^2 |1 - e^{i k1}|^2 + w_x^2 |1 - e^{i k2}|^2."""
    k = np.asarray(k, dtype=float)
    w = np.asarray(w, dtype=float)
    wx2, wz2 = w[0] ** 2, w[2] ** 2
    return wz2 * (2 - 2 * np.cos(k[..., 0])) + wx2 * (2 - 2 * np.cos(k[..., 1]))


def f_lambda(theta_star: float, lam: float, mode="integral", L: int | None = None) -> float:
    """F(lambda, w) = (1/2) int dk/(2pi)^2 log(lambda + D_k(w)).

    mode 'lattice': the exact reciprocal-torus sum at side L.
    mode 'integral': k1 resummed exactly, k2 on a dense lattice (needs
    lambda > 0 unless the direction is axis-aligned).
    """
    wx2 = float(np.cos(theta_star) ** 2)
    wz2 = float(np.sin(theta_star) ** 2)
    if mode == "lattice":
        if L is None:
            raise ValueError("lattice mode needs L")
        if lam <= 0.0 and min(wx2, wz2) >= 0:
            # the k = 0 term is log(lam): lam = 0 cannot be absorbed
            if lam <= 0.0:
                raise ValueError("lattice sum needs lambda > 0 at k = 0")
        k = 2 * np.pi * np.arange(L) / L
        u = 2 - 2 * np.cos(k)
        M = lam + wz2 * u[:, None] + wx2 * u[None, :]
        return float(0.5 * np.log(M).mean())
    if mode != "integral":
        raise ValueError(f"unknown mode {mode!r}")
    if lam <= 0.0 and wx2 > 1e-30 and wz2 > 1e-30:
        raise ValueError("integral mode needs lambda > 0 off the axes")
    return _f_reduced(wx2, wz2, lam, L or (1 << 17))


def _f_reduced(wx2: float, wz2: float, lam: float, L: int) -> float:
    """k1-resummed lattice value of (1/2) <log(lam + D)> over k2."""
    lo, hi = (wx2, wz2) if wx2 <= wz2 else (wz2, wx2)
    k2 = 2 * np.pi * np.arange(L) / L
    a = lam + hi * (2 - 2 * np.cos(k2)) + 2 * lo
    if lo < 1e-30:
        return float(0.5 * np.log(np.maximum(a, 1e-300)).mean())
    disc = np.sqrt(np.maximum(a * a - 4 * lo * lo, 0.0))
    return float(0.5 * np.log((a + disc) / 2).mean())


def f_infinite(
    theta_star: float,
    lams=LAMBDA_LADDER,
    L: int = 1 << 17,
    return_fit: bool = False,
):
    """lambda -> 0 extrapolation of the regularized free energy.

    Fits F(lambda) = F0 + a lambda log(lambda) + b lambda + c sqrt(lambda) on
    the ladder; raises when the fit does not reproduce the ladder (Richardson
    nonconvergence guard).
    """
    F = np.array([_f_reduced_sym(theta_star, lam, L) for lam in lams])
    la = np.array(lams, dtype=float)
    A = np.stack([np.ones_like(la), la * np.log(la), la, np.sqrt(la)], axis=1)
    coef, *_ = np.linalg.lstsq(A, F, rcond=None)
    resid = float(np.abs(A @ coef - F).max())
    if resid > 1e-4:
        raise ArithmeticError(f"lambda extrapolation did not converge (resid {resid:.1e})")
    if return_fit:
        return float(coef[0]), {"coef": coef, "ladder": F, "resid": resid}
    return float(coef[0])


def _f_reduced_sym(theta_star, lam, L):
    wx2 = float(np.cos(theta_star) ** 2)
    wz2 = float(np.sin(theta_star) ** 2)
    return _f_reduced(wx2, wz2, lam, L)


def minimize_f(resolution_deg: float = 1.0, **kw) -> dict:
    """Grid minimization of F over the quarter circle.

    Returns the argmin set (in degrees), the positive interior gap, and the
    grid values.
    """
    if resolution_deg > 1.0:
        raise ValueError("resolution must be <= 1 degree")
    degs = np.arange(0.0, 90.0 + 1e-9, resolution_deg)
    vals = np.array([f_infinite(np.deg2rad(d), **kw) for d in degs])
    vmin = vals.min()
    argmin = degs[np.abs(vals - vmin) < 1e-9]
    interior = vals[1:-1]
    return {
        "degrees": degs,
        "values": vals,
        "argmin_degrees": argmin,
        "interior_gap": float(interior.min() - vmin),
        "monotone_to_45": bool(np.all(np.diff(vals[degs <= 45.0]) > 0)),
    }


# ---------------------------------------------------------------------------
# direct MC estimate of the constrained free energy


@dataclass(frozen=True)
class ConeFreeEnergy:
    """Thermodynamic-integration estimate of the cone-constrained free energy
    per site, normalized so that it converges to F(w) in the spin-wave regime."""

    theta_star: float
    value: float
    sigma: float
    beta: float
    Delta: float
    L: int
    regime_ok: bool


def _cone_constraint(w: np.ndarray, Delta: float):
    cos_d = np.cos(Delta)

    def pred(v):
        return np.asarray(v) @ w >= cos_d

    return pred


def f_mc_direct(
    L: int,
    Delta: float,
    beta: float,
    theta_star: float,
    seed: int = 0,
    n_grid: int = 24,
    sweeps: int = 400,
    replicas: int = 2,
    regime_delta: float = 0.25,
) -> ConeFreeEnergy:
    """F_{L,Delta}(w) for the planar-rotor frame of the compass model.

    -(1/L^2) log [ (beta / (sqrt(2) pi))^{L^2} * Z_cone(beta) ] with the
    ground-state-normalized energy H + |T_L|; the spin-wave regime flags
    require beta Delta^2 > 1/delta and beta Delta^3 < delta.
    """
    from .classical_mc import mc_state, sweep

    sw = SpinWaveSpec(theta_star, Delta=Delta, L=L)
    regime_ok = bool(beta * Delta**2 > 1.0 / regime_delta and beta * Delta**3 < regime_delta)
    geometry = build_torus(2, L, 1)
    spec = orbital_compass(SpinMagnitude(1), geometry)
    constraint = _cone_constraint(sw.w, Delta)
    n = geometry.n_sites

    # log integral of e^{-beta(H + N)} over the cone product, by TI in beta:
    # log Z(0) = N log(2 pi (1 - cos Delta)); d log Z / d beta = -<H + N>
    nodes_lin = np.linspace(0.0, min(1.0, beta), 8, endpoint=False)[1:]
    nodes_geo = np.geomspace(max(1.0, beta * 1e-4), beta, n_grid)
    nodes = np.unique(np.concatenate([[0.0], nodes_lin, nodes_geo]))
    cone = min(0.6, Delta / 2.0)
    vals = []
    for r in range(replicas):
        # no symmetry flips: the cone constraint pins one sector anyway
        state = mc_state(
            spec, 0.0, seed + 7919 * r, site_constraint=constraint, cone=cone, flips=()
        )
        sweep(state, sweeps)
        means = np.zeros(nodes.size)
        for i, b in enumerate(nodes):
            state.beta = float(b)
            sweep(state, sweeps // 2)
            acc = []
            for _ in range(max(sweeps // 8, 10)):
                sweep(state, 2)
                acc.append(classical_energy(spec, state.config) + n)
            means[i] = float(np.mean(acc))
        log_ratio = -np.trapezoid(means, nodes)
        log_z0 = n * np.log(2 * np.pi * (1 - np.cos(Delta)))
        log_pref = n * np.log(beta / (np.sqrt(2.0) * np.pi))
        vals.append(-(log_pref + log_z0 + log_ratio) / n)
    vals = np.array(vals)
    return ConeFreeEnergy(
        theta_star=theta_star,
        value=float(vals.mean()),
        sigma=float(vals.std(ddof=1) / np.sqrt(replicas)) if replicas > 1 else 0.0,
        beta=beta,
        Delta=Delta,
        L=L,
        regime_ok=regime_ok,
    )


def gaussian_bracket(theta_star: float, beta: float, Delta: float, lam: float) -> dict:
    """The lambda-shifted Gaussian bounds around the constrained free energy.

    Lower: F(lambda, w) - lambda beta Delta^2 / 2 (soften the cone indicator
    into a Gaussian weight).  Upper: F(lambda, w) - log P(stay in the cone)
    per site under the lambda-massive Gaussian, with the variance bound
    var(theta_r) <= 1/(lambda beta) and the zeta-tail exp(-lambda beta
    Delta^2 / 4).
    """
    f_lam = _f_reduced_sym(theta_star, lam, 1 << 15)
    lower = f_lam - 0.5 * lam * beta * Delta**2
    p_zeta = max(1.0 - np.exp(-beta * Delta**2 / 4.0), 1e-12)
    p_theta = max(1.0 - 4.0 / (lam * beta * Delta**2), 1e-12)
    upper = f_lam - np.log(p_zeta) - np.log(p_theta)
    return {"lower": float(lower), "upper": float(upper), "f_lambda": float(f_lam)}


# ---------------------------------------------------------------------------
# 120-degree deviation-variable identity


def flatten_y(config: np.ndarray) -> np.ndarray:
    """Set the cylindrical y-coordinate to zero, keeping the xz angle."""
    out = np.array(config, dtype=float, copy=True)
    out[:, 1] = 0.0
    nrm = np.linalg.norm(out[:, [0, 2]], axis=1, keepdims=True)
    out[:, 0] /= nrm[:, 0]
    out[:, 2] /= nrm[:, 0]
    return out


def deviation_identity_check(spec: ModelSpec, config: np.ndarray, Delta: float) -> dict:
    """|H(O) - H(O') - (3/2) sum_r y_r^2| against the c Delta^3 L^3 envelope.

    Hypotheses checked: |y_r| <= Delta^2 and per-direction projection gaps at
    most Delta.
    """
    if spec.kind != "onetwenty_3d":
        raise ValueError("identity is for the 120-degree model")
    config = np.asarray(config, dtype=float)
    g = spec.geometry
    if np.abs(config[:, 1]).max() > Delta**2 + 1e-12:
        raise ValueError("hypothesis violated: |y| exceeds Delta^2")
    axes = spec.bond_axes()
    for direction in range(3):
        p = config @ axes[direction]
        gap = np.abs(p - p[g.neighbor_indices(direction)]).max()
        if gap > Delta + 1e-12:
            raise ValueError("hypothesis violated: projection gap exceeds Delta")
    flat = flatten_y(config)
    y2 = float((config[:, 1] ** 2).sum())
    resid = abs(
        classical_energy(spec, config) - classical_energy(spec, flat) - 1.5 * y2
    )
    n = g.n_sites
    return {
        "residual": resid,
        "normalized_c": resid / (Delta**3 * n) if Delta > 0 else 0.0,
        "y_square_sum": y2,
    }


def admissible_120_config(geometry, Delta: float, seed: int = 0) -> np.ndarray:
    """Random configuration satisfying the deviation-identity hypotheses.

    Smooth xz angles (one soft Fourier mode per lattice axis, amplitudes
    scaled so every neighbor angle gap stays below Delta / 2) plus an
    independent y-component of size just under Delta^2.
    """
    rng = np.random.default_rng(seed)
    L = geometry.L
    coords = geometry.site_coords
    base = rng.uniform(0.0, 2 * np.pi)
    angles = np.full(geometry.n_sites, base)
    amp = Delta / 2.0 / (2 * np.sin(np.pi / L)) / geometry.d
    for axis in range(geometry.d):
        phase = rng.uniform(0.0, 2 * np.pi)
        a = rng.uniform(0.5, 1.0) * amp
        angles = angles + a * np.sin(2 * np.pi * coords[:, axis] / L + phase)
    zeta = rng.uniform(-1.0, 1.0, geometry.n_sites) * Delta**2 * 0.98
    rho = np.sqrt(1.0 - zeta**2)
    return np.column_stack([rho * np.cos(angles), zeta, rho * np.sin(angles)])
