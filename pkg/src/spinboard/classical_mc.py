"""Classical Gibbs sampling on the sphere-configuration space of the torus.

Metropolis with single-site cone proposals, swept in checkerboard order so
the nearest-neighbor models update half the lattice at once.  On top of the
sampler: block-event classification, the thermodynamic-integration estimate
of the disseminated-event functional, the classical chessboard inequality,
and beta-scan transition diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import ModelSpec, bond_energy, classical_energy, local_field_energy
from .torus import BlockEvent, TorusGeometry, cap_event


@dataclass
class MCState:
    """Mutable sampler state; the RNG carries the stream position."""

    spec: ModelSpec
    beta: float
    config: np.ndarray
    rng: np.random.Generator
    cone: float = 0.6
    proposed: int = 0
    accepted: int = 0
    site_constraint: object = None  # predicate on (n, 3) vectors, or None
    flip_masks: tuple = ()  # global spin-space sign flips tried once per sweep

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0

    def energy(self) -> float:
        return classical_energy(self.spec, self.config)


def _neighbor_stack(geom: TorusGeometry):
    idx = []
    for direction in range(geom.d):
        idx.append(geom.neighbor_indices(direction, +1))
        idx.append(geom.neighbor_indices(direction, -1))
    return np.array(idx)


def _checkerboard_masks(geom: TorusGeometry):
    par = geom.site_coords.sum(axis=1) % 2
    return [par == 0, par == 1]


def cone_proposals(rng, current: np.ndarray, cone: float) -> np.ndarray:
    """Uniform proposals in the spherical cap of half-angle cone around each
    current direction."""
    n = current.shape[0]
    cosa = rng.uniform(np.cos(cone), 1.0, n)
    sina = np.sqrt(1.0 - cosa**2)
    psi = rng.uniform(0.0, 2 * np.pi, n)
    # orthonormal frame around each current vector
    z = current
    helper = np.where(np.abs(z[:, 2:3]) < 0.9, [[0.0, 0.0, 1.0]], [[1.0, 0.0, 0.0]])
    e1 = np.cross(z, helper)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(z, e1)
    out = (
        cosa[:, None] * z
        + (sina * np.cos(psi))[:, None] * e1
        + (sina * np.sin(psi))[:, None] * e2
    )
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def uniform_config(rng, n: int) -> np.ndarray:
    from .su2kit import sample_sphere

    return sample_sphere(rng, n)


def mc_state(
    spec: ModelSpec,
    beta: float,
    seed: int = 0,
    init: np.ndarray | None = None,
    cone: float = 0.6,
    site_constraint=None,
    flips=None,
) -> MCState:
    rng = np.random.default_rng(seed)
    if init is None:
        if site_constraint is None:
            init = uniform_config(rng, spec.geometry.n_sites)
        else:
            init = _constrained_uniform(rng, spec.geometry.n_sites, site_constraint)
    if flips is None:
        flips = symmetry_flips(spec)
    return MCState(
        spec,
        beta,
        np.array(init, dtype=float),
        rng,
        cone,
        site_constraint=site_constraint,
        flip_masks=tuple(flips),
    )


def _constrained_uniform(rng, n: int, constraint) -> np.ndarray:
    out = np.zeros((n, 3))
    need = np.ones(n, dtype=bool)
    while need.any():
        cand = uniform_config(rng, int(need.sum()))
        ok = constraint(cand)
        idx = np.flatnonzero(need)[ok]
        out[idx] = cand[ok]
        need[idx] = False
    return out


def metropolis_accept_prob(dE, beta: float) -> np.ndarray:
    """min(1, exp(-beta dE)), the acceptance rule shared by the sampler and
    the detailed-balance diagnostics."""
    x = -beta * np.asarray(dE, dtype=float)
    return np.minimum(1.0, np.exp(np.minimum(x, 0.0)))


def symmetry_flips(spec: ModelSpec) -> tuple:
    """Global spin-space sign flips that leave the rp-frame energy invariant.

    These restore ergodicity between symmetry-broken sectors, where
    single-site moves freeze at large beta (the constrained-chain analogue of
    dissemination-by-reflection moves).
    """
    k = spec.kind
    if k in ("heisenberg_af", "orbital_compass_2d"):
        return (
            (-1.0, 1.0, 1.0),
            (1.0, -1.0, 1.0),
            (1.0, 1.0, -1.0),
        )
    if k == "nonlinear_xy":
        return ((1.0, -1.0, 1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, -1.0))
    if k in ("nematic", "onetwenty_3d"):
        return ((1.0, -1.0, 1.0), (-1.0, -1.0, -1.0))
    return ()


def sweep(state: MCState, n_sweeps: int = 1) -> MCState:
    """Checkerboard Metropolis sweeps of single-site cone proposals."""
    geom = state.spec.geometry
    nbr = _neighbor_stack(geom)
    masks = _checkerboard_masks(geom)
    cfg = state.config
    for _ in range(n_sweeps):
        for mask in masks:
            idx = np.flatnonzero(mask)
            prop = cone_proposals(state.rng, cfg[idx], state.cone)
            if state.site_constraint is not None:
                ok = state.site_constraint(prop)
                prop = np.where(ok[:, None], prop, cfg[idx])
            stack = cfg[nbr[:, idx]]
            e_old = local_field_energy(state.spec, cfg[idx], stack)
            e_new = local_field_energy(state.spec, prop, stack)
            accept = state.rng.uniform(0.0, 1.0, idx.size) < metropolis_accept_prob(
                e_new - e_old, state.beta
            )
            cfg[idx[accept]] = prop[accept]
            state.proposed += idx.size
            state.accepted += int(accept.sum())
        for mask in state.flip_masks:
            flipped = cfg * np.asarray(mask)[None, :]
            if state.site_constraint is not None and not np.all(
                state.site_constraint(flipped)
            ):
                continue
            dE = classical_energy(state.spec, flipped) - classical_energy(
                state.spec, cfg
            )
            if state.rng.uniform() < metropolis_accept_prob(dE, state.beta):
                cfg = flipped
    state.config = cfg
    return state


def mc_run(
    spec: ModelSpec,
    beta: float,
    sweeps: int,
    seed: int = 0,
    thin: int = 1,
    burn_in: int | None = None,
    observable=None,
    **kw,
) -> dict:
    """Run a fresh chain and collect an observable trace.

    observable maps a configuration to a float (default: energy per site);
    returns the state plus the post-burn-in samples.
    """
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    state = mc_state(spec, beta, seed, **kw)
    if burn_in is None:
        burn_in = max(sweeps // 5, 10)
    sweep(state, burn_in)
    if observable is None:
        observable = lambda cfg: classical_energy(spec, cfg) / spec.geometry.n_sites
    out = []
    done = 0
    while done < sweeps:
        sweep(state, thin)
        done += thin
        out.append(observable(state.config))
    return {"state": state, "samples": np.array(out)}


# ---------------------------------------------------------------------------
# block classification


_BLOCK_SITE_CACHE: dict = {}


def block_site_table(geom: TorusGeometry) -> np.ndarray:
    """(n_blocks, block_volume) site-index table, cached per geometry."""
    key = (geom.d, geom.L, geom.B)
    if key not in _BLOCK_SITE_CACHE:
        _BLOCK_SITE_CACHE[key] = np.array(
            [geom.block_sites(t) for t in range(geom.n_blocks)]
        )
    return _BLOCK_SITE_CACHE[key]


def classify_blocks(geom: TorusGeometry, config: np.ndarray, events) -> np.ndarray:
    """Label each block with the index of the unique occurring event, or -1.

    Raises when two supposedly exclusive events hold on the same block.
    """
    table = block_site_table(geom)
    passes = np.zeros((len(events), geom.n_blocks), dtype=bool)
    for i, ev in enumerate(events):
        if ev.site_predicate is not None:
            mask = ev.site_mask(config)
            passes[i] = mask[table].all(axis=1)
        else:
            for t in range(geom.n_blocks):
                passes[i, t] = ev.occurs(geom, config, t)
    multi = passes.sum(axis=0) > 1
    if multi.any():
        t = int(np.flatnonzero(multi)[0])
        names = [events[i].name for i in range(len(events)) if passes[i, t]]
        raise ValueError(f"overlapping good events {names} on block {t}")
    labels = np.full(geom.n_blocks, -1, dtype=int)
    for i in range(len(events)):
        labels[passes[i]] = i
    return labels


@dataclass(frozen=True)
class BlockCensus:
    """Per-beta fractions of each good event plus energy statistics."""

    beta: float
    fractions: tuple
    bad_fraction: float
    energy_density: float
    energy_sigma: float
    adjacent_distinct_good: int

    @property
    def good_fraction(self) -> float:
        return float(sum(self.fractions))


def census(
    spec: ModelSpec, events, beta: float, sweeps: int, seed: int = 0, thin: int = 5, **kw
) -> BlockCensus:
    geom = spec.geometry
    state = mc_state(spec, beta, seed, **kw)
    sweep(state, max(sweeps // 4, 20))
    counts = np.zeros(len(events))
    bad = 0
    total = 0
    adjacent = 0
    energies = []
    n_meas = max(sweeps // thin, 1)
    for _ in range(n_meas):
        sweep(state, thin)
        labels = classify_blocks(geom, state.config, events)
        for i in range(len(events)):
            counts[i] += int((labels == i).sum())
        bad += int((labels == -1).sum())
        total += geom.n_blocks
        adjacent += count_adjacent_distinct_good(geom, labels)
        energies.append(classical_energy(spec, state.config) / geom.n_sites)
    energies = np.array(energies)
    nb = max(len(energies) // 8, 1)
    block_means = energies[: nb * 8].reshape(8, -1).mean(axis=1) if len(energies) >= 8 else energies
    return BlockCensus(
        beta=beta,
        fractions=tuple(counts / total),
        bad_fraction=bad / total,
        energy_density=float(energies.mean()),
        energy_sigma=float(block_means.std(ddof=1) / np.sqrt(len(block_means)))
        if len(block_means) > 1
        else 0.0,
        adjacent_distinct_good=adjacent,
    )


def scan_incompatibility(geom: TorusGeometry, config: np.ndarray, events) -> int:
    """Number of incompatibility violations in one configuration.

    For every pair of neighboring blocks carrying distinct goodness, the
    straddling block shifted by the offset ell along the joining direction
    must be bad; returns how many such intermediate blocks are good.
    """
    labels = classify_blocks(geom, config, events)
    side = geom.factor_side
    lab = labels.reshape((side,) * geom.d)
    violations = 0
    for axis in range(geom.d):
        rolled = np.roll(lab, -1, axis=axis)
        hits = np.argwhere((lab >= 0) & (rolled >= 0) & (lab != rolled))
        for t in hits:
            ev = events[lab[tuple(t)]]
            ell = getattr(ev, "ell", 1)
            base = geom.block_sites(tuple(t))
            coords = geom.site_coords[base].copy()
            coords[:, axis] = (coords[:, axis] + ell) % geom.L
            sites = np.ravel_multi_index(coords.T, (geom.L,) * geom.d)
            spins = np.asarray(config)[sites]
            for good in events:
                if good.site_predicate is not None:
                    ok = bool(np.all(good.site_predicate(spins)))
                else:
                    ok = bool(good.block_predicate(spins, geom))
                if ok:
                    violations += 1
                    break
    return violations


def count_adjacent_distinct_good(geom: TorusGeometry, labels: np.ndarray) -> int:
    """Pairs of neighboring blocks carrying distinct types of goodness."""
    side = geom.factor_side
    d = geom.d
    lab = labels.reshape((side,) * d)
    hits = 0
    for axis in range(d):
        rolled = np.roll(lab, -1, axis=axis)
        both_good = (lab >= 0) & (rolled >= 0)
        hits += int((both_good & (lab != rolled)).sum())
    return hits


def good_event_family(spec: ModelSpec, kappa: float = 0.3, b: float = 0.15):
    """The standard incompatible good events for each model kind."""
    kind = spec.kind
    if kind == "heisenberg_af":
        return [
            cap_event([0, 0, 1], kappa, "G+"),
            cap_event([0, 0, -1], kappa, "G-"),
        ]
    if kind == "orbital_compass_2d":
        from .torus import abs_projection_event

        return [
            abs_projection_event([1, 0, 0], kappa, "Gx"),
            abs_projection_event([0, 0, 1], kappa, "Gz"),
        ]
    if kind == "onetwenty_3d":
        from .models import V_HEX

        return [cap_event(V_HEX[i], kappa, f"G{i + 1}") for i in range(6)]
    if kind in ("nonlinear_xy", "nematic"):
        return [
            ordered_block_event(spec, b),
            disordered_block_event(spec, b),
        ]
    raise ValueError(kind)


def _block_bond_values(spec: ModelSpec, spins: np.ndarray, geom: TorusGeometry):
    """Bond energies inside one block (block side B, d directions)."""
    B, d = geom.B, geom.d
    lat = spins.reshape((B,) * d + (3,))
    vals = []
    for axis in range(d):
        sl_a = [slice(None)] * d
        sl_b = [slice(None)] * d
        sl_a[axis] = slice(0, B - 1)
        sl_b[axis] = slice(1, B)
        u = lat[tuple(sl_a)].reshape(-1, 3)
        v = lat[tuple(sl_b)].reshape(-1, 3)
        vals.append(bond_energy(spec, u, v, axis))
    return np.concatenate(vals)


def ordered_block_event(spec: ModelSpec, b: float) -> BlockEvent:
    """Every block bond attracts with strength at least b (energetically good)."""

    def block_pred(spins, geom):
        return bool(np.all(_block_bond_values(spec, spins, geom) <= -b))

    return BlockEvent(name="Gord", block_predicate=block_pred, params=(b,))


def disordered_block_event(spec: ModelSpec, b: float) -> BlockEvent:
    """Every block bond attracts with strength below b (entropically good)."""

    def block_pred(spins, geom):
        return bool(np.all(_block_bond_values(spec, spins, geom) > -b))

    return BlockEvent(name="Gdis", block_predicate=block_pred, params=(b,))


# ---------------------------------------------------------------------------
# disseminated-event functional via thermodynamic integration


@dataclass(frozen=True)
class FrakPEstimate:
    """Per-block cost of a disseminated event.

    log_prob is log P(intersection of reflected copies); p_hat its
    (B/L)^d-th root; the confidence interval is one standard error of
    p_hat across independent replicas.
    """

    event: str
    log_prob: float
    p_hat: float
    sigma: float
    beta: float
    replicas: int


def _ti_log_ratio(
    spec: ModelSpec,
    beta: float,
    constraint,
    seed: int,
    n_grid: int = 12,
    sweeps: int = 300,
) -> float:
    """log of Z_constrained(beta) / Z_constrained(0) by integrating -<H> d beta.

    Gauss-Legendre nodes in beta', warm-started in ascending order.
    """
    x, w = np.polynomial.legendre.leggauss(n_grid)
    nodes = (x + 1) / 2 * beta
    weights = w * beta / 2
    order = np.argsort(nodes)
    state = mc_state(spec, 0.0, seed, site_constraint=constraint)
    sweep(state, sweeps)
    means = np.zeros(n_grid)
    for i in order:
        state.beta = float(nodes[i])
        sweep(state, sweeps // 2)
        vals = []
        for _ in range(max(sweeps // 3, 12)):
            sweep(state, 1)
            vals.append(classical_energy(spec, state.config))
        means[i] = float(np.mean(vals))
    return float(-(weights * means).sum())


def estimate_frakp(
    spec: ModelSpec,
    beta: float,
    event: BlockEvent,
    seed: int = 0,
    replicas: int = 4,
    n_grid: int = 12,
    sweeps: int = 300,
) -> FrakPEstimate:
    """Thermodynamic-integration estimate of the disseminated-event cost.

    Only per-site product events are supported: dissemination of a uniform
    site condition constrains every site identically, the beta = 0 anchor is
    then the exact product-measure probability, and the only stochastic part
    is the integral of the constrained-minus-free energy.
    """
    if event.site_predicate is None:
        raise ValueError("thermodynamic-integration route needs a per-site product event")
    if not event.sigma_invariant:
        raise ValueError("event must be sigma-invariant for conjugation-aware dissemination")
    g = spec.geometry
    p_site = _site_probability(event)
    log_p0 = g.n_sites * np.log(p_site)
    logs = []
    for r in range(replicas):
        lc = _ti_log_ratio(
            spec, beta, event.site_predicate, seed + 1000 * r, n_grid, sweeps
        )
        lf = _ti_log_ratio(spec, beta, None, seed + 1000 * r + 500, n_grid, sweeps)
        logs.append(log_p0 + lc - lf)
    logs = np.array(logs)
    rho = (g.B / g.L) ** g.d
    p_vals = np.exp(rho * logs)
    return FrakPEstimate(
        event=event.name,
        log_prob=float(logs.mean()),
        p_hat=float(p_vals.mean()),
        sigma=float(p_vals.std(ddof=1) / np.sqrt(replicas)) if replicas > 1 else 0.0,
        beta=beta,
        replicas=replicas,
    )


def _site_probability(event: BlockEvent) -> float:
    """Uniform-measure probability of the site condition.

    Exact when the event carries its closed-form mass (caps do); otherwise a
    dense product-grid estimate, only good to ~1e-3 for indicator functions.
    """
    if event.site_probability is not None:
        return float(event.site_probability)
    x, w = np.polynomial.legendre.leggauss(512)
    phi = 2 * np.pi * (np.arange(128) + 0.5) / 128
    Z, PH = np.meshgrid(x, phi, indexing="ij")
    rho = np.sqrt(1 - Z**2)
    pts = np.stack([rho * np.cos(PH), rho * np.sin(PH), Z], axis=-1).reshape(-1, 3)
    mask = event.site_mask(pts).reshape(512, 128)
    return float((w @ mask.mean(axis=1)) / 2.0)


def frakp_beta_zero_exact(event: BlockEvent, geom: TorusGeometry) -> float:
    """Closed-form product-measure value p_site^(B^d)."""
    return _site_probability(event) ** geom.block_volume


def transfer_integral_frakp(
    spec: ModelSpec, beta: float, event: BlockEvent, n_nodes: int = 48
) -> float:
    """d = 1 oracle: the per-block cost from transfer-operator quadrature.

    For chains whose bond energy depends only on the z-components (the
    J1 = J2 = 0 anisotropic model with polar-cap events), the transfer kernel
    reduces to exp(beta z z') on the z-marginal.
    """
    g = spec.geometry
    if g.d != 1 or g.B != 1:
        raise ValueError("transfer-integral oracle is for d = 1, B = 1")
    if spec.kind != "heisenberg_af" or spec.J1 != 0.0 or spec.J2 != 0.0:
        raise ValueError("oracle kernel implemented for the z-coupled chain")
    x, w = np.polynomial.legendre.leggauss(n_nodes)

    def log_trace(lo, hi):
        z = (x + 1) / 2 * (hi - lo) + lo
        wt = w * (hi - lo) / 2
        K = np.exp(beta * np.outer(z, z))
        K = np.sqrt(np.outer(wt, wt)) * K
        evs = np.linalg.eigvalsh((K + K.T) / 2)
        lam = np.abs(evs) ** g.L
        sign = np.sign(evs) ** g.L
        tot = float((sign * lam).sum())
        return np.log(tot)

    axis, kappa = event.params
    if tuple(axis) != (0.0, 0.0, 1.0):
        raise ValueError("oracle supports polar caps about +z")
    log_zc = log_trace(np.cos(kappa), 1.0)
    log_zf = log_trace(-1.0, 1.0)
    return float(np.exp((log_zc - log_zf) / g.L))


# ---------------------------------------------------------------------------
# classical chessboard


def event_probability_mc(
    spec: ModelSpec,
    beta: float,
    block_to_event: dict,
    sweeps: int = 2000,
    seed: int = 0,
    thin: int = 2,
) -> tuple:
    """MC frequency of the joint occurrence of reflected events at blocks."""
    from .torus import reflect_site_map, parity

    g = spec.geometry
    state = mc_state(spec, beta, seed)
    sweep(state, max(sweeps // 4, 50))
    hits = []
    for _ in range(max(sweeps // thin, 1)):
        sweep(state, thin)
        ok = True
        for t, ev in block_to_event.items():
            if not ev.occurs(g, state.config, t):
                ok = False
                break
        hits.append(1.0 if ok else 0.0)
    hits = np.array(hits)
    nb = 8
    take = len(hits) // nb * nb
    bm = hits[:take].reshape(nb, -1).mean(axis=1)
    return float(hits.mean()), float(bm.std(ddof=1) / np.sqrt(nb))


def chessboard_check_classical(
    spec: ModelSpec,
    beta: float,
    events: dict,
    seed: int = 0,
    sweeps: int = 2000,
    frakp_kw: dict | None = None,
) -> dict:
    """P(joint placement) <= product of frakp(A_j): both sides by MC.

    events maps block indices to sigma-invariant per-site product events.
    """
    lhs, lhs_sig = event_probability_mc(spec, beta, events, sweeps=sweeps, seed=seed)
    frakp_kw = frakp_kw or {}
    rhs = 1.0
    rel_var = 0.0
    for j, (t, ev) in enumerate(sorted(events.items())):
        est = estimate_frakp(spec, beta, ev, seed=seed + 31 * (j + 1), **frakp_kw)
        rhs *= est.p_hat
        rel_var += (est.sigma / max(est.p_hat, 1e-300)) ** 2
    rhs_sig = rhs * float(np.sqrt(rel_var))
    sigma = float(np.hypot(lhs_sig, rhs_sig))
    return {
        "lhs": lhs,
        "rhs": rhs,
        "margin": rhs - lhs,
        "sigma": sigma,
        "lhs_sigma": lhs_sig,
        "rhs_sigma": rhs_sig,
    }


# ---------------------------------------------------------------------------
# beta scans


def beta_scan(
    spec: ModelSpec,
    betas,
    events,
    seed: int = 0,
    sweeps: int = 800,
    thin: int = 4,
    anneal: bool = True,
) -> list:
    """Census along a sorted beta grid with warm starts between points."""
    betas = list(betas)
    if betas != sorted(betas):
        raise ValueError("beta grid must be sorted")
    out = []
    state = mc_state(spec, betas[0], seed)
    sweep(state, max(sweeps // 2, 50))
    geom = spec.geometry
    for beta in betas:
        if anneal:
            state.beta = float(beta)
            sweep(state, max(sweeps // 3, 30))
            counts = np.zeros(len(events))
            bad = 0
            total = 0
            adjacent = 0
            energies = []
            for _ in range(max(sweeps // thin, 1)):
                sweep(state, thin)
                labels = classify_blocks(geom, state.config, events)
                for i in range(len(events)):
                    counts[i] += int((labels == i).sum())
                bad += int((labels == -1).sum())
                total += geom.n_blocks
                adjacent += count_adjacent_distinct_good(geom, labels)
                energies.append(classical_energy(spec, state.config) / geom.n_sites)
            energies = np.array(energies)
            nb = max(min(8, len(energies)), 2)
            take = len(energies) // nb * nb
            bm = energies[:take].reshape(nb, -1).mean(axis=1)
            out.append(
                BlockCensus(
                    beta=float(beta),
                    fractions=tuple(counts / total),
                    bad_fraction=bad / total,
                    energy_density=float(energies.mean()),
                    energy_sigma=float(bm.std(ddof=1) / np.sqrt(nb)),
                    adjacent_distinct_good=adjacent,
                )
            )
        else:
            out.append(census(spec, events, float(beta), sweeps, seed=seed))
    return out


def jump_statistic(censuses) -> float:
    """max consecutive energy-density step over the median step."""
    e = np.array([c.energy_density for c in censuses])
    steps = np.abs(np.diff(e))
    med = float(np.median(steps))
    return float(steps.max() / med) if med > 0 else np.inf


def spearman_rho(x, y) -> float:
    """Spearman rank correlation (no ties expected on MC data)."""
    x = np.asarray(x)
    y = np.asarray(y)
    rx = np.argsort(np.argsort(x)).astype(float)
    ry = np.argsort(np.argsort(y)).astype(float)
    rx -= rx.mean()
    ry -= ry.mean()
    return float((rx * ry).sum() / np.sqrt((rx**2).sum() * (ry**2).sum()))
