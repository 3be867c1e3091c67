"""The five lattice spin models: classical energies, quantum builders,
reflection-positivity transforms, and the large-entropy bound constants.

All classical evaluation is done in the reflection-positive frame, the frame
in which every block-event and chessboard computation must be carried out.
The original-frame quantum Hamiltonians are kept for the unitary-equivalence
checks.  Interactions carry their inverse powers of S at build time, so
operator norms stay bounded uniformly in S.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from math import comb, sqrt

import numpy as np

from .su2kit import SpinMagnitude, build_spin_operators, embed_operator, kron_all
from .torus import TorusGeometry, build_torus

KINDS = ("heisenberg_af", "nonlinear_xy", "nematic", "orbital_compass_2d", "onetwenty_3d")

# Unit vectors at angles 0, 60, ..., 300 degrees in the xz-plane: the sixth
# roots of unity, stored exactly.
V_HEX = np.array(
    [
        [1.0, 0.0, 0.0],
        [0.5, 0.0, sqrt(3) / 2],
        [-0.5, 0.0, sqrt(3) / 2],
        [-1.0, 0.0, 0.0],
        [-0.5, 0.0, -sqrt(3) / 2],
        [0.5, 0.0, -sqrt(3) / 2],
    ]
)


@dataclass(frozen=True)
class ModelSpec:
    """One of the five models on a torus.

    coeffs are the nonnegative, l1-normalized interaction coefficients
    (c_1..c_p) of the polynomial kinds; sign_mode distinguishes the two
    nonlinear-XY variants (odd coefficients flip sign in the original frame).
    diamond_mode records which variant of the dot product the polynomial
    kinds use; in the rp frame the nonlinear-XY product acts on the (x, z)
    spin components.
    """

    kind: str
    magnitude: SpinMagnitude
    geometry: TorusGeometry
    J1: float = 0.0
    J2: float = 0.0
    coeffs: tuple = ()
    sign_mode: str = "plus"
    epsilon_p: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "heisenberg_af" and not (0 <= self.J1 < 1 and 0 <= self.J2 < 1):
            raise ValueError("heisenberg_af needs 0 <= J1, J2 < 1")
        if self.kind in ("nonlinear_xy", "nematic"):
            c = np.asarray(self.coeffs, dtype=float)
            if len(c) == 0 or np.any(c < 0):
                raise ValueError("polynomial kinds need nonnegative coefficients")
            if abs(c.sum() - 1.0) > 1e-9:
                raise ValueError("coefficients must be l1-normalized")
            if len(c) > 32:
                raise ValueError("polynomial degree capped at 32")
        if self.sign_mode not in ("plus", "minus"):
            raise ValueError("sign_mode must be 'plus' or 'minus'")
        if self.kind == "orbital_compass_2d" and self.geometry.d != 2:
            raise ValueError("the orbital-compass model lives on a 2d torus")
        if self.kind == "onetwenty_3d" and self.geometry.d != 3:
            raise ValueError("the 120-degree model lives on a 3d torus")

    @property
    def diamond_mode(self) -> str:
        return "xz_flip_y" if self.kind == "nematic" else "xy_only"

    def poly(self, x):
        """E_p(x) = sum_k c_k x^k (k starts at 1)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k in range(len(self.coeffs), 0, -1):
            out = (out + self.coeffs[k - 1]) * x
        return out

    def bond_axes(self):
        """Per-direction spin axes for the rp-frame linear kinds."""
        if self.kind == "orbital_compass_2d":
            return np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])[: self.geometry.d]
        if self.kind == "onetwenty_3d":
            return V_HEX[[1, 3, 5]]  # v2, v4, v6 for lattice directions 1..3
        raise ValueError(f"{self.kind} has no per-direction axes")


def heisenberg(S: SpinMagnitude, geometry: TorusGeometry, J1=0.0, J2=0.0) -> ModelSpec:
    return ModelSpec("heisenberg_af", S, geometry, J1=J1, J2=J2)


def power_mean_coeffs(p: int):
    """Coefficients of ((1+x)/2)^p with the constant term dropped and the
    rest renormalized to unit l1 norm."""
    c = np.array([comb(p, k) for k in range(1, p + 1)], dtype=float) / 2.0**p
    return tuple(c / c.sum())


def nonlinear_xy(S, geometry, p=16, sign_mode="plus", coeffs=None) -> ModelSpec:
    coeffs = power_mean_coeffs(p) if coeffs is None else tuple(coeffs)
    return ModelSpec(
        "nonlinear_xy", S, geometry, coeffs=coeffs, sign_mode=sign_mode, epsilon_p=1.0 / p
    )


def nematic(S, geometry, p=16, coeffs=None) -> ModelSpec:
    if coeffs is None:
        # even-only support: E_p(x) = ((1+x^2)/2)^(p/2) style profile
        half = max(p // 2, 1)
        base = power_mean_coeffs(half)
        coeffs = []
        for k, c in enumerate(base, start=1):
            coeffs.extend([0.0] * (2 * k - 1 - len(coeffs)))
            coeffs.append(c)
        coeffs = tuple(coeffs)
    return ModelSpec("nematic", S, geometry, coeffs=tuple(coeffs), epsilon_p=2.0 / p)


def orbital_compass(S, geometry) -> ModelSpec:
    return ModelSpec("orbital_compass_2d", S, geometry)


def onetwenty(S, geometry) -> ModelSpec:
    return ModelSpec("onetwenty_3d", S, geometry)


# ---------------------------------------------------------------------------
# classical energies (rp frame)


def diamond(u: np.ndarray, v: np.ndarray, mode: str) -> np.ndarray:
    """The two dot-product variants of the polynomial kinds (paper frame)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if mode == "xy_only":
        return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1]
    if mode == "xz_flip_y":
        return u[..., 0] * v[..., 0] - u[..., 1] * v[..., 1] + u[..., 2] * v[..., 2]
    raise ValueError(f"unknown diamond mode {mode!r}")


def bond_energy(spec: ModelSpec, u: np.ndarray, v: np.ndarray, direction: int) -> np.ndarray:
    """Classical rp-frame energy of one bond in the given lattice direction."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    kind = spec.kind
    if kind == "heisenberg_af":
        return -(
            spec.J1 * u[..., 0] * v[..., 0]
            - spec.J2 * u[..., 1] * v[..., 1]
            + u[..., 2] * v[..., 2]
        )
    if kind == "nonlinear_xy":
        # rp frame couples the (x, z) components
        return -spec.poly(u[..., 0] * v[..., 0] + u[..., 2] * v[..., 2])
    if kind == "nematic":
        return -spec.poly(diamond(u, v, "xz_flip_y"))
    if kind == "orbital_compass_2d":
        a = spec.bond_axes()[direction]
        return -(u @ a) * (v @ a)
    if kind == "onetwenty_3d":
        a = spec.bond_axes()[direction]
        return -(u @ a) * (v @ a)
    raise ValueError(kind)


def classical_energy(spec: ModelSpec, config: np.ndarray) -> float:
    """H_infty of the configuration: sum of rp-frame bond energies."""
    config = np.asarray(config, dtype=float)
    g = spec.geometry
    total = 0.0
    for direction in range(g.d):
        nb = g.neighbor_indices(direction)
        total += float(bond_energy(spec, config, config[nb], direction).sum())
    return total


def classical_energy_completed_square(spec: ModelSpec, config: np.ndarray) -> float:
    """Gradient-form of H_infty for the order-by-disorder kinds.

    compass (d=2):  (1/2) sum_r sum_dir (proj_r - proj_{r+e})^2
                    + sum_r y_r^2 - |T_L|
    120-degree:     (1/2) sum_r sum_dir (proj^{(2a)}_r - proj^{(2a)}_{r+e_a})^2
                    + (3/2) sum_r y_r^2 - (3/2)|T_L|
    """
    config = np.asarray(config, dtype=float)
    g = spec.geometry
    axes = spec.bond_axes()
    grad = 0.0
    for direction in range(g.d):
        p = config @ axes[direction]
        grad += 0.5 * float(((p - p[g.neighbor_indices(direction)]) ** 2).sum())
    y2 = float((config[:, 1] ** 2).sum())
    if spec.kind == "orbital_compass_2d":
        return grad + y2 - g.n_sites
    if spec.kind == "onetwenty_3d":
        return grad + 1.5 * y2 - 1.5 * g.n_sites
    raise ValueError(f"no completed-square form for {spec.kind}")


def local_field_energy(spec: ModelSpec, config: np.ndarray, neighbor_stack) -> np.ndarray:
    """Energy of each site against its current neighbors.

    neighbor_stack is the (2d, n, 3) array of neighbor spins, ordered
    (+e_0, -e_0, +e_1, ...); used by the Monte Carlo sweeps.
    """
    config = np.asarray(config, dtype=float)
    e = np.zeros(config.shape[0])
    for direction in range(spec.geometry.d):
        e += bond_energy(spec, config, neighbor_stack[2 * direction], direction)
        e += bond_energy(spec, config, neighbor_stack[2 * direction + 1], direction)
    return e


# ---------------------------------------------------------------------------
# quantum builders


def bond_operator(spec: ModelSpec, direction: int, frame: str = "rp") -> np.ndarray:
    """Two-site bond operator for the given lattice direction.

    rp frame: the manifestly reflection-positive form (ferromagnetic signs,
    real couplings up to the iS^y trick).  original frame: the model as
    first defined; for the compass and 120-degree kinds this couples the
    in-plane (x, y) components with antiferromagnetic sign.
    """
    S = spec.magnitude
    ops = build_spin_operators(S)
    s = S.S
    x, y, z = ops.Sx, ops.Sy, ops.Sz
    kind = spec.kind

    def two(a, b):
        return np.kron(a, b)

    if kind == "heisenberg_af":
        if frame == "rp":
            return -(spec.J1 * two(x, x) - spec.J2 * two(y, y) + two(z, z)) / s**2
        return +(spec.J1 * two(x, x) + spec.J2 * two(y, y) + two(z, z)) / s**2
    if kind == "nonlinear_xy":
        if frame == "rp":
            base = (two(x, x) + two(z, z)) / s**2
            signs = [1.0] * len(spec.coeffs)
        else:
            base = (two(x, x) + two(y, y)) / s**2
            # minus mode: P(x) = P1(x^2) - x P2(x^2), so odd coefficients flip
            signs = [
                (-1.0) ** k if spec.sign_mode == "minus" else 1.0
                for k in range(1, len(spec.coeffs) + 1)
            ]
        out = np.zeros_like(base)
        power = np.eye(base.shape[0], dtype=complex)
        for k, c in enumerate(spec.coeffs, start=1):
            power = power @ base
            out = out + signs[k - 1] * c * power
        return -out
    if kind == "nematic":
        if frame == "rp":
            base = (two(x, x) - two(y, y) + two(z, z)) / s**2
        else:
            base = -(two(x, x) + two(y, y) + two(z, z)) / s**2
        out = np.zeros_like(base)
        power = np.eye(base.shape[0], dtype=complex)
        for c in spec.coeffs:
            power = power @ base
            out = out + c * power
        return -out
    if kind == "orbital_compass_2d":
        if frame == "rp":
            a = spec.bond_axes()[direction]
            op = a[0] * x + a[2] * z
            return -two(op, op) / s**2
        op = x if direction == 0 else y
        return +two(op, op) / s**2
    if kind == "onetwenty_3d":
        if frame == "rp":
            a = spec.bond_axes()[direction]
            op = a[0] * x + a[2] * z
            return -two(op, op) / s**2
        # original frame: T^1 = Sx, T^(2,3) = -(1/2)Sx +- (sqrt3/2)Sy
        t = [x, -0.5 * x + (sqrt(3) / 2) * y, -0.5 * x - (sqrt(3) / 2) * y][direction]
        return +two(t, t) / s**2
    raise ValueError(kind)


def build_quantum_hamiltonian(
    spec: ModelSpec, frame: str = "rp", dim_cap: int = 2**14
) -> np.ndarray:
    """Dense Hamiltonian on the spec's torus in the requested frame."""
    g = spec.geometry
    dim = spec.magnitude.dim
    D = dim**g.n_sites
    if D > dim_cap:
        raise ValueError(f"Hilbert dimension {D} exceeds cap {dim_cap}")
    H = np.zeros((D, D), dtype=complex)
    for r, r2, direction in g.bonds():
        op = bond_operator(spec, direction, frame)
        H += embed_operator(op, [r, r2], g.n_sites, dim)
    return H


def single_bond_hamiltonian(spec: ModelSpec, direction: int = 0, frame: str = "rp") -> np.ndarray:
    """The open two-site system with exactly one bond (no periodic wrap)."""
    return bond_operator(spec, direction, frame)


def _site_unitary_ua(S: SpinMagnitude) -> np.ndarray:
    from scipy.linalg import expm

    ops = build_spin_operators(S)
    return expm(1j * np.pi / 2 * ops.Sy) @ expm(1j * np.pi / 2 * ops.Sx)


def _site_unitary_ub(S: SpinMagnitude) -> np.ndarray:
    from scipy.linalg import expm

    ops = build_spin_operators(S)
    return expm(1j * np.pi * ops.Sy)


def rp_transform(spec: ModelSpec) -> np.ndarray:
    """The unitary carrying the original frame to a reflection-positive one.

    kinds 1 and 3 use the odd-sublattice flip U_B; kind 4, 5 and kind 2 with
    the plus sign use the component cycle U_A; kind 2 with the minus sign
    needs U_B U_A.  On bipartite tori the compass/120 kinds additionally need
    the odd-sublattice sign flip to turn the couplings ferromagnetic, so the
    returned transform for those kinds is U_B U_A as well; the lemma-level
    identity tested per bond is the U_A component relabeling.
    """
    g = spec.geometry
    S = spec.magnitude
    dim = S.dim
    ua = _site_unitary_ua(S)
    ub = _site_unitary_ub(S)
    par = np.array([sum(c) % 2 for c in g.site_coords])
    per_site = []
    for r in range(g.n_sites):
        if spec.kind in ("heisenberg_af", "nematic"):
            m = ub if par[r] else np.eye(dim)
        elif spec.kind == "nonlinear_xy" and spec.sign_mode == "plus":
            m = ua
        else:
            m = (ub if par[r] else np.eye(dim)) @ ua
        per_site.append(m)
    return kron_all(per_site)


def rp_transform_kind(spec: ModelSpec) -> str:
    """Which of the lemma transforms applies: 'UA', 'UB', or 'UBUA'."""
    if spec.kind in ("heisenberg_af", "nematic"):
        return "UB"
    if spec.kind == "nonlinear_xy":
        return "UA" if spec.sign_mode == "plus" else "UBUA"
    return "UA"


def rp_check(
    H_rp: np.ndarray,
    geometry: TorusGeometry,
    S: SpinMagnitude,
    beta: float,
    trials: int = 200,
    seed: int = 0,
) -> dict:
    """Reflection positivity of the Gibbs state through the plane between
    sites splitting the torus into halves along direction 0.

    Draws random operators A on the positive half and reports the minimum of
    <A conj(theta(A))>_{L,beta} over the trials; the beta = 0 state is also
    checked (generalized reflection positivity of the normalized trace).
    """
    from scipy.linalg import eigh

    g = geometry
    dim = S.dim
    half = [r for r in range(g.n_sites) if g.site_coords[r][0] < g.L // 2]
    mirror = {r: g.site_index((g.L - 1 - g.site_coords[r][0], *g.site_coords[r][1:])) for r in half}
    rng = np.random.default_rng(seed)
    evals, evecs = eigh(H_rp)
    w = np.exp(-beta * (evals - evals.min()))
    rho = (evecs * w) @ evecs.conj().T
    rho /= np.trace(rho).real
    dplus = dim ** len(half)
    worst = np.inf
    worst0 = np.inf
    for _ in range(trials):
        A = rng.normal(size=(dplus, dplus)) + 1j * rng.normal(size=(dplus, dplus))
        big_A = embed_operator(A, half, g.n_sites, dim)
        big_theta = embed_operator(A.conj(), [mirror[r] for r in half], g.n_sites, dim)
        op = big_A @ big_theta
        val = np.trace(rho @ op)
        worst = min(worst, val.real)
        worst0 = min(worst0, (np.trace(op) / op.shape[0]).real)
    return {"min_expectation": worst, "min_expectation_beta0": worst0, "trials": trials}


# ---------------------------------------------------------------------------
# large-entropy machinery


@dataclass(frozen=True)
class EntropyProfile:
    """Interaction profile E_p with its entropy-scale epsilon_p.

    coeffs are (c_0, ..., c_p) including the constant term; normalization is
    E_p(1) = 1.
    """

    p: int
    coeffs: tuple
    epsilon_p: float
    limit: object = None  # A(s) closure, when known

    def energy(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c in reversed(self.coeffs):
            out = out * x + c
        return out

    def A(self, s):
        """A_p(s) = E_p(1 - epsilon_p s)."""
        return self.energy(1.0 - self.epsilon_p * np.asarray(s, dtype=float))

    def limit_A(self, s):
        if self.limit is None:
            raise ValueError("no closed-form limit attached")
        return self.limit(np.asarray(s, dtype=float))


def entropy_profile(p: int, family: str = "power_mean", density=None) -> EntropyProfile:
    """power_mean: E_p(x) = ((1+x)/2)^p, epsilon_p = 1/p, A(s) = exp(-s/2).
    density: c_k = phi(k/p)/p renormalized, A(s) = int phi(t) e^{-t s} dt.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if family == "power_mean":
        coeffs = tuple(comb(p, k) / 2.0**p for k in range(0, p + 1))
        # keep the k = 0 constant; E_p(1) = 1 exactly
        return EntropyProfile(p, coeffs, 1.0 / p, limit=lambda s: np.exp(-s / 2.0))
    if family == "density":
        if density is None:
            raise ValueError("density family needs a callable phi")
        raw = np.array([density(k / p) / p for k in range(1, p + 1)], dtype=float)
        if np.any(raw < 0) or raw.sum() <= 0:
            raise ValueError("density must be nonnegative and normalizable")
        coeffs = (0.0,) + tuple(raw / raw.sum())

        def limA(s):
            t = np.linspace(0.0, 1.0, 2001)
            phi = np.array([density(tt) for tt in t])
            phi = phi / np.trapezoid(phi, t)
            s = np.atleast_1d(np.asarray(s, dtype=float))
            out = np.array([np.trapezoid(phi * np.exp(-t * ss), t) for ss in s])
            return out if out.size > 1 else float(out[0])

        return EntropyProfile(p, coeffs, 1.0 / p, limit=limA)
    raise ValueError(f"unknown family {family!r}")


@dataclass(frozen=True)
class EntropyBounds:
    """Constants of the mixed-pattern and weak-strong bond estimates."""

    d: int
    a_d: int
    b: float
    b_prime: float
    t: float
    A_p_t: float
    Delta: float
    Delta_prime: float
    feasible_kappa2: bool
    feasible_b0: bool


def entropy_bound_constants(
    d: int, b: float, b_prime: float, t: float, profile: EntropyProfile | None = None, A_p_t: float | None = None
) -> EntropyBounds:
    if not (0 < b < 0.5 and 0 < b_prime < 0.5):
        raise ValueError("need 0 < b, b' < 1/2")
    a_d = d * 2 ** (d - 1)
    if A_p_t is None:
        A_p_t = float(profile.A(t))
    delta = min(1.0 + 1.0 / a_d - 1.0 / A_p_t, 1.0 / a_d - b / A_p_t)
    delta_prime = 1.0 - (1.0 - b_prime / a_d) / A_p_t
    return EntropyBounds(
        d=d,
        a_d=a_d,
        b=b,
        b_prime=b_prime,
        t=t,
        A_p_t=A_p_t,
        Delta=delta,
        Delta_prime=delta_prime,
        feasible_kappa2=(1.0 - (1.0 - b) / a_d) / A_p_t <= 1.0 + 1e-15,
        feasible_b0=b < 1.0 / (1.0 + a_d),
    )


def block_edges(d: int):
    """Edges of the 2^d block as pairs of corner indices (bit vectors)."""
    edges = []
    for v in range(2**d):
        for j in range(d):
            if not v >> j & 1:
                edges.append((v, v | 1 << j))
    return edges


def bond_pattern_stats(d: int, pattern) -> tuple:
    """(f_b, f_s) for a disordered/ordered labeling of the block edges.

    pattern[i] is True when edge i (in block_edges order) is disordered;
    f_b is the disordered-bond fraction, f_s the fraction of corners whose
    incident block edges are all disordered.
    """
    edges = block_edges(d)
    pattern = list(pattern)
    if len(pattern) != len(edges):
        raise ValueError(f"pattern needs {len(edges)} entries")
    f_b = sum(map(bool, pattern)) / len(edges)
    incident = {v: [] for v in range(2**d)}
    for i, (a, b) in enumerate(edges):
        incident[a].append(pattern[i])
        incident[b].append(pattern[i])
    f_s = sum(1 for v in incident if all(incident[v])) / 2**d
    return f_b, f_s


# ---------------------------------------------------------------------------
# TOML serialization


def spec_to_toml(spec: ModelSpec) -> str:
    buf = io.StringIO()
    buf.write("[model]\n")
    buf.write(f'kind = "{spec.kind}"\n')
    buf.write(f"twoS = {spec.magnitude.twoS}\n")
    g = spec.geometry
    buf.write(f"d = {g.d}\nL = {g.L}\nB = {g.B}\n")
    if spec.kind == "heisenberg_af":
        buf.write(f"J1 = {spec.J1!r}\nJ2 = {spec.J2!r}\n")
    if spec.coeffs:
        buf.write(f"coeffs = [{', '.join(repr(float(c)) for c in spec.coeffs)}]\n")
        buf.write(f'sign_mode = "{spec.sign_mode}"\n')
        buf.write(f"epsilon_p = {spec.epsilon_p!r}\n")
    return buf.getvalue()


def spec_from_toml(text: str) -> ModelSpec:
    import tomli

    data = tomli.loads(text)["model"]
    known = {"kind", "twoS", "d", "L", "B", "J1", "J2", "coeffs", "sign_mode", "epsilon_p"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown model keys: {sorted(unknown)}")
    geometry = build_torus(data["d"], data["L"], data["B"])
    return ModelSpec(
        kind=data["kind"],
        magnitude=SpinMagnitude(data["twoS"]),
        geometry=geometry,
        J1=data.get("J1", 0.0),
        J2=data.get("J2", 0.0),
        coeffs=tuple(data.get("coeffs", ())),
        sign_mode=data.get("sign_mode", "plus"),
        epsilon_p=data.get("epsilon_p", 0.0),
    )
