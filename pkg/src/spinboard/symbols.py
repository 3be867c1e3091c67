"""Sphere quadrature and the coherent-state symbol calculus.

Lower symbols are plain coherent expectations.  Upper symbols are computed by
spherical-tensor diagonalization: the quantization map

    f  ->  (2S+1)/(4pi) * integral f(O) |O><O| dO

is diagonal on the operator multiplets obtained by quantizing the spherical
harmonics, so expanding an operator in that basis and dividing by the
quantization eigenvalues c_l yields the minimal-degree upper symbol.
Multi-site (bond) upper symbols use the product rule: the two-site basis is
the tensor product of single-site multiplets with eigenvalue c_l1 * c_l2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import sph_harm_y

from .su2kit import SpinMagnitude, coherent_amplitudes, config_angles

__all__ = [
    "SphereQuadrature",
    "SymbolExpansion",
    "SymbolGap",
    "sphere_quadrature",
    "lower_symbol",
    "upper_symbol",
    "quantize",
    "quantize_function",
    "tensor_basis",
    "hamiltonian_symbols",
    "bond_symbols",
    "estimate_xi",
]


@dataclass(frozen=True)
class SphereQuadrature:
    """Product Gauss-Legendre (in cos theta) x uniform (in phi) rule.

    Exact for spherical polynomials up to the declared degree; weights sum
    to 4pi.
    """

    degree: int
    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.weights.size

    def integrate(self, values: np.ndarray):
        return np.tensordot(values, self.weights, axes=(0, 0))


def sphere_quadrature(degree: int) -> SphereQuadrature:
    if degree < 0:
        raise ValueError("degree must be >= 0")
    n_t = degree // 2 + 1
    n_p = degree + 1
    x, w = np.polynomial.legendre.leggauss(n_t)
    theta = np.arccos(x)
    phi = 2 * np.pi * np.arange(n_p) / n_p
    TH, PH = np.meshgrid(theta, phi, indexing="ij")
    W = np.outer(w, np.full(n_p, 2 * np.pi / n_p))
    return SphereQuadrature(degree, TH.ravel(), PH.ravel(), W.ravel())


def lower_symbol(A: np.ndarray, config: np.ndarray, S: SpinMagnitude) -> complex:
    """<O|A|O> for the product coherent state of the configuration."""
    from .su2kit import product_coherent_vector

    psi = product_coherent_vector(S, config)
    if A.shape != (psi.size, psi.size):
        raise ValueError(f"operator dim {A.shape} does not match {psi.size}")
    return complex(psi.conj() @ A @ psi)


@dataclass(frozen=True)
class SymbolExpansion:
    """Function on the sphere(s) given by spherical-harmonic coefficients.

    Single-site expansions are keyed by (l, m); two-site bond expansions by
    ((l1, m1), (l2, m2)).  Evaluation reproduces sum a_lm Y_lm pointwise.
    """

    S: SpinMagnitude
    coeffs: dict
    n_sites: int = 1

    @property
    def degree(self) -> int:
        if self.n_sites == 1:
            return max((l for l, _ in self.coeffs), default=0)
        return max((k[0][0] + k[1][0] for k in self.coeffs), default=0)

    def evaluate(self, theta, phi):
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        if self.n_sites == 1:
            out = np.zeros(np.broadcast(theta, phi).shape, dtype=complex)
            for (l, m), a in self.coeffs.items():
                out = out + a * sph_harm_y(l, m, theta, phi)
            return out
        # two-site: theta, phi have a leading axis of length 2
        out = np.zeros(np.broadcast(theta[0], phi[0]).shape, dtype=complex)
        cache = {}
        for ((l1, m1), (l2, m2)), a in self.coeffs.items():
            k1 = (0, l1, m1)
            k2 = (1, l2, m2)
            if k1 not in cache:
                cache[k1] = sph_harm_y(l1, m1, theta[0], phi[0])
            if k2 not in cache:
                cache[k2] = sph_harm_y(l2, m2, theta[1], phi[1])
            out = out + a * cache[k1] * cache[k2]
        return out

    def __add__(self, other: "SymbolExpansion") -> "SymbolExpansion":
        if self.S != other.S or self.n_sites != other.n_sites:
            raise ValueError("incompatible expansions")
        coeffs = dict(self.coeffs)
        for k, v in other.coeffs.items():
            coeffs[k] = coeffs.get(k, 0.0) + v
        return SymbolExpansion(self.S, coeffs, self.n_sites)


@lru_cache(maxsize=32)
def tensor_basis(twoS: int):
    """Orthonormal spherical-tensor operator basis and quantization spectrum.

    Returns (T, c) where T[(l, m)] is the Hilbert-Schmidt-normalized operator
    multiplet obtained by quantizing Y_lm, and c[l] > 0 is the quantization
    eigenvalue: quantize(Y_lm) = c_l T[(l, m)].
    """
    S = SpinMagnitude(twoS)
    quad = sphere_quadrature(2 * twoS + 8)  # integrands have degree <= 2*twoS
    amps = coherent_amplitudes(twoS, quad.theta, quad.phi)
    T, c = {}, {}
    pref = S.dim / (4 * np.pi)
    for l in range(0, twoS + 1):
        for m in [0] + [mm for mm in range(-l, l + 1) if mm != 0]:
            y = sph_harm_y(l, m, quad.theta, quad.phi)
            Q = pref * np.einsum("i,i,ia,ib->ab", quad.weights, y, amps, amps.conj())
            nrm = float(np.sqrt(np.abs(np.vdot(Q, Q))))
            T[(l, m)] = Q / nrm
            if m == 0:
                c[l] = nrm
            elif abs(nrm - c[l]) > 1e-9 * max(c[l], 1.0):
                raise AssertionError(f"quantization not diagonal at l={l}, m={m}")
    return T, c


def quantize_function(
    values_fn, S: SpinMagnitude, degree: int, n_sites: int = 1
) -> np.ndarray:
    """(2S+1)/(4pi) * integral f(O) |O><O| dO by quadrature of the given degree."""
    quad = sphere_quadrature(degree)
    amps = coherent_amplitudes(S.twoS, quad.theta, quad.phi)
    pref = S.dim / (4 * np.pi)
    if n_sites == 1:
        f = values_fn(quad.theta, quad.phi)
        return pref * np.einsum("i,i,ia,ib->ab", quad.weights, f, amps, amps.conj())
    if n_sites != 2:
        raise ValueError("quantize supports 1 or 2 sites")
    th = np.stack(np.meshgrid(quad.theta, quad.theta, indexing="ij"))
    ph = np.stack(np.meshgrid(quad.phi, quad.phi, indexing="ij"))
    f = values_fn(th.reshape(2, -1), ph.reshape(2, -1)).reshape(
        quad.n_nodes, quad.n_nodes
    )
    W = np.outer(quad.weights, quad.weights)
    pair = np.einsum("ia,jb->ijab", amps, amps).reshape(quad.n_nodes**2, -1)
    mat = (W.ravel() * f.ravel())[:, None] * pair
    out = pref**2 * (pair.conj().T @ mat).T
    D = S.dim**2
    return out.reshape(D, D)


def quantize(f: SymbolExpansion, S: SpinMagnitude | None = None) -> np.ndarray:
    """Quantize an expansion; diagonal in the spherical-tensor basis."""
    S = S or f.S
    T, c = tensor_basis(S.twoS)
    if f.n_sites == 1:
        out = np.zeros((S.dim, S.dim), dtype=complex)
        for (l, m), a in f.coeffs.items():
            if l <= S.twoS:
                out += a * c[l] * T[(l, m)]
            # harmonics beyond l = 2S quantize to zero
        return out
    out = np.zeros((S.dim**2, S.dim**2), dtype=complex)
    for ((l1, m1), (l2, m2)), a in f.coeffs.items():
        if l1 <= S.twoS and l2 <= S.twoS:
            out += a * c[l1] * c[l2] * np.kron(T[(l1, m1)], T[(l2, m2)])
    return out


def upper_symbol(A: np.ndarray, S: SpinMagnitude, tol: float = 1e-9) -> SymbolExpansion:
    """Minimal-degree upper symbol of a single-site operator.

    Rejects input whose spherical-tensor content beyond l = 2S exceeds tol
    (possible only for operators of the wrong dimension, but kept as a guard
    for function-defined inputs routed through quantization).
    """
    if A.shape != (S.dim, S.dim):
        raise ValueError(f"operator must be {S.dim}x{S.dim}")
    T, c = tensor_basis(S.twoS)
    coeffs = {}
    recon = np.zeros_like(A, dtype=complex)
    for (l, m), t in T.items():
        a = complex(np.vdot(t, A))
        if a != 0:
            coeffs[(l, m)] = a / c[l]
            recon += a * t
    resid = float(np.abs(recon - A).max())
    if resid > tol:
        raise ValueError(
            f"operator has harmonic content beyond degree {S.twoS} "
            f"(residual {resid:.2e})"
        )
    return SymbolExpansion(S, coeffs, 1)


def two_site_upper_symbol(
    h: np.ndarray, S: SpinMagnitude, tol: float = 1e-9
) -> SymbolExpansion:
    """Upper symbol of a two-site operator via the tensor product rule.

    <T_k1 x T_k2, h> for all pairs at once through the operator-Schmidt
    rearrangement h[(a,c),(b,d)] -> R[(a,b),(c,d)].
    """
    dim = S.dim
    D = dim**2
    if h.shape != (D, D):
        raise ValueError(f"bond operator must be {D}x{D}")
    T, c = tensor_basis(S.twoS)
    keys = sorted(T)
    tmat = np.stack([T[k].ravel() for k in keys], axis=1)  # (dim^2, n_ops)
    R = h.reshape(dim, dim, dim, dim).transpose(0, 2, 1, 3).reshape(D, D)
    # a[k1, k2] = vec(T_k1)^H R conj(vec(T_k2))
    A = tmat.conj().T @ R @ tmat.conj()
    recon = tmat @ A @ tmat.T
    top = float(np.abs(recon - R).max())
    if top > tol:
        raise ValueError(f"bond operator decomposition failed (residual {top:.2e})")
    coeffs = {}
    for i, k1 in enumerate(keys):
        for j, k2 in enumerate(keys):
            a = A[i, j]
            if abs(a) > 1e-13:
                coeffs[(k1, k2)] = complex(a) / (c[k1[0]] * c[k2[0]])
    return SymbolExpansion(S, coeffs, 2)


# ---------------------------------------------------------------------------
# model symbols


@dataclass(frozen=True)
class BondSymbols:
    """Lower and upper symbol evaluators for one bond type."""

    operator: np.ndarray
    upper: SymbolExpansion

    def lower_values(self, S: SpinMagnitude, u_angles, v_angles) -> np.ndarray:
        """<O,O'|h|O,O'> on batched angle arrays."""
        au = coherent_amplitudes(S.twoS, u_angles[0], u_angles[1])
        av = coherent_amplitudes(S.twoS, v_angles[0], v_angles[1])
        pair = np.einsum("na,nb->nab", au, av).reshape(au.shape[0], -1)
        return np.einsum("ni,ij,nj->n", pair.conj(), self.operator, pair)

    def upper_values(self, u_angles, v_angles) -> np.ndarray:
        th = np.stack([u_angles[0], v_angles[0]])
        ph = np.stack([u_angles[1], v_angles[1]])
        return self.upper.evaluate(th, ph)


@lru_cache(maxsize=64)
def _bond_symbols_cached(key) -> BondSymbols:
    from . import models

    kind, twoS, direction, J1, J2, coeffs, sign_mode, d = key
    from .torus import build_torus

    L = 2 if kind != "onetwenty_3d" else 2
    geometry = build_torus(d, L, 1)
    spec = models.ModelSpec(
        kind,
        SpinMagnitude(twoS),
        geometry,
        J1=J1,
        J2=J2,
        coeffs=coeffs,
        sign_mode=sign_mode,
    )
    h = models.bond_operator(spec, direction, frame="rp")
    return BondSymbols(h, two_site_upper_symbol(h, spec.magnitude))


def bond_symbols(spec, direction: int) -> BondSymbols:
    key = (
        spec.kind,
        spec.magnitude.twoS,
        direction,
        spec.J1,
        spec.J2,
        tuple(spec.coeffs),
        spec.sign_mode,
        spec.geometry.d,
    )
    return _bond_symbols_cached(key)


def hamiltonian_symbols(spec, config: np.ndarray) -> tuple:
    """(lower, upper) symbol of the rp-frame Hamiltonian at a configuration.

    The upper symbol is assembled bond by bond through the product rule; the
    lower symbol is the direct product-coherent expectation, which factorizes
    over the bond's two sites.
    """
    config = np.asarray(config, dtype=float)
    g = spec.geometry
    theta, phi = config_angles(config)
    low = 0.0
    up = 0.0
    for direction in range(g.d):
        bs = bond_symbols(spec, direction)
        nb = g.neighbor_indices(direction)
        ua = (theta, phi)
        va = (theta[nb], phi[nb])
        low += float(bs.lower_values(spec.magnitude, ua, va).real.sum())
        up += float(bs.upper_values(ua, va).real.sum())
    return low, up


@dataclass(frozen=True)
class SymbolGap:
    """Per-site bound xi on both symbol gaps, with the sampled suprema."""

    xi: float
    model: str
    S: SpinMagnitude
    sampled_upper_gap: float
    sampled_lower_gap: float
    bond_gap: float
    samples: int


def estimate_xi(spec, samples: int = 512, seed: int = 0) -> SymbolGap:
    """Per-site symbol-gap constant for the rp-frame Hamiltonian.

    The per-bond gap sup is sampled over random single-bond configurations
    augmented with axis-aligned extreme pairs (which realize the supremum for
    the linear-coupling kinds); xi is d times that bond sup, since each site
    owns d bonds.
    """
    from . import models
    from .su2kit import sample_sphere

    if spec is None:  # trivial Hamiltonian
        return SymbolGap(0.0, "null", SpinMagnitude(1), 0.0, 0.0, 0.0, samples)
    rng = np.random.default_rng(seed)
    g = spec.geometry
    directions = list(range(g.d))
    u = sample_sphere(rng, samples)
    v = sample_sphere(rng, samples)
    axes = np.array(
        [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]],
        dtype=float,
    )
    corners_u = np.repeat(axes, len(axes), axis=0)
    corners_v = np.tile(axes, (len(axes), 1))
    u = np.vstack([u, corners_u])
    v = np.vstack([v, corners_v])
    tu, pu = config_angles(u)
    tv, pv = config_angles(v)
    bond_gap = 0.0
    up_gap = 0.0
    low_gap = 0.0
    for direction in directions:
        bs = bond_symbols(spec, direction)
        classical = models.bond_energy(spec, u, v, direction)
        lowv = bs.lower_values(spec.magnitude, (tu, pu), (tv, pv)).real
        upv = bs.upper_values((tu, pu), (tv, pv)).real
        gl = float(np.abs(lowv - classical).max())
        gu = float(np.abs(upv - classical).max())
        low_gap = max(low_gap, gl)
        up_gap = max(up_gap, gu)
        bond_gap = max(bond_gap, gl, gu)
    return SymbolGap(
        xi=g.d * bond_gap,
        model=spec.kind,
        S=spec.magnitude,
        sampled_upper_gap=up_gap,
        sampled_lower_gap=low_gap,
        bond_gap=bond_gap,
        samples=samples,
    )
