"""Exact spin-S operator algebra, coherent states, and configuration distances.

Everything here is dense and exact up to floating point: ladder-operator
matrices for arbitrary half-integer magnitude, coherent vectors from the
binomial amplitude formula, rotation unitaries with their SO(3) shadows, and
the l1 / l2 / mixed distance functions used by the matrix-element bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, sqrt

import numpy as np
from scipy.linalg import expm

# Overlap-decay constant: |<O|O'>| <= exp(-ETA * mixed_distance).
ETA = 0.25


@dataclass(frozen=True)
class SpinMagnitude:
    """Spin magnitude S stored exactly as the integer 2S."""

    twoS: int

    def __post_init__(self):
        if not isinstance(self.twoS, (int, np.integer)) or self.twoS < 1:
            raise ValueError(f"twoS must be a positive integer, got {self.twoS!r}")

    @classmethod
    def from_spin(cls, s: float) -> "SpinMagnitude":
        twoS = int(round(2 * s))
        if abs(2 * s - twoS) > 1e-12:
            raise ValueError(f"{s} is not a half-integer spin")
        return cls(twoS)

    @property
    def S(self) -> float:
        return self.twoS / 2.0

    @property
    def dim(self) -> int:
        return self.twoS + 1

    @property
    def m_values(self) -> np.ndarray:
        """Basis labels M = -S..S in ascending order."""
        return np.arange(self.dim) - self.S


@dataclass(frozen=True)
class SpinOperators:
    """Dense (2S+1)-dimensional generators in the M = -S..S basis."""

    magnitude: SpinMagnitude
    Sx: np.ndarray
    Sy: np.ndarray
    Sz: np.ndarray
    Splus: np.ndarray
    Sminus: np.ndarray

    def as_vector(self) -> np.ndarray:
        """Stacked (3, dim, dim) array (Sx, Sy, Sz)."""
        return np.stack([self.Sx, self.Sy, self.Sz])

    def dotted(self, n: np.ndarray) -> np.ndarray:
        """n . S for a real 3-vector n."""
        return n[0] * self.Sx + n[1] * self.Sy + n[2] * self.Sz


def build_spin_operators(S: SpinMagnitude) -> SpinOperators:
    """Ladder construction: Sz|M> = M|M>, S+|M> = sqrt(S(S+1)-M(M+1))|M+1>."""
    s = S.S
    m = S.m_values
    sp = np.zeros((S.dim, S.dim), dtype=complex)
    for i in range(S.dim - 1):
        sp[i + 1, i] = sqrt(s * (s + 1) - m[i] * (m[i] + 1))
    sm = sp.conj().T
    sx = (sp + sm) / 2.0
    sy = (sp - sm) / 2.0j
    sz = np.diag(m).astype(complex)
    return SpinOperators(S, sx, sy, sz, sp, sm)


@dataclass(frozen=True)
class SphericalPoint:
    """Point on the unit sphere: theta is the azimuthal (polar) angle in
    [0, pi], phi the polar (longitude) angle in [0, 2*pi)."""

    theta: float
    phi: float

    def __post_init__(self):
        if not (-1e-12 <= self.theta <= np.pi + 1e-12):
            raise ValueError(f"theta out of range: {self.theta}")

    @classmethod
    def from_cartesian(cls, v) -> "SphericalPoint":
        v = np.asarray(v, dtype=float)
        n = np.linalg.norm(v)
        if abs(n - 1.0) > 1e-10:
            raise ValueError(f"not a unit vector (norm {n})")
        theta = float(np.arccos(np.clip(v[2] / n, -1.0, 1.0)))
        phi = float(np.arctan2(v[1], v[0])) % (2 * np.pi)
        return cls(theta, phi)

    @property
    def cartesian(self) -> np.ndarray:
        st = np.sin(self.theta)
        return np.array(
            [st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)]
        )

    @property
    def zeta(self) -> complex:
        """Stereographic projection tan(theta/2) e^{i phi}."""
        return np.tan(self.theta / 2.0) * np.exp(1j * self.phi)

    def conjugated(self) -> "SphericalPoint":
        """Reflection through the xz-plane, phi -> -phi."""
        return SphericalPoint(self.theta, (-self.phi) % (2 * np.pi))


def pairwise_angle(a: SphericalPoint, b: SphericalPoint) -> float:
    """Geodesic angle between two sphere points."""
    return float(np.arccos(np.clip(a.cartesian @ b.cartesian, -1.0, 1.0)))


@dataclass(frozen=True)
class CoherentVector:
    """Single-spin coherent state |Omega> with its direction."""

    magnitude: SpinMagnitude
    point: SphericalPoint
    amplitudes: np.ndarray = field(repr=False)


def coherent_amplitudes(twoS: int, theta, phi) -> np.ndarray:
    """Batched coherent amplitudes, shape (..., 2S+1), basis M = -S..S.

    Amplitude on |M>: binom(2S, S+M)^(1/2) cos(t/2)^(S+M) sin(t/2)^(S-M)
    e^{i (S-M) phi}; index k = S+M runs 0..2S.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    k = np.arange(twoS + 1)
    root_binom = np.array([sqrt(comb(twoS, int(j))) for j in k])
    c = np.cos(theta / 2.0)[..., None]
    s = np.sin(theta / 2.0)[..., None]
    mag = root_binom * c**k * s ** (twoS - k)
    return mag * np.exp(1j * phi[..., None] * (twoS - k))


def coherent_vector(S: SpinMagnitude, omega: SphericalPoint) -> CoherentVector:
    amps = coherent_amplitudes(S.twoS, omega.theta, omega.phi)
    return CoherentVector(S, omega, amps)


def product_coherent_vector(S: SpinMagnitude, config: np.ndarray) -> np.ndarray:
    """Tensor product coherent state for a configuration of unit 3-vectors.

    config has shape (n_sites, 3); the result lives in C^(dim^n_sites) with
    site 0 as the slowest index.
    """
    config = np.atleast_2d(np.asarray(config, dtype=float))
    theta, phi = config_angles(config)
    amps = coherent_amplitudes(S.twoS, theta, phi)
    psi = amps[0]
    for r in range(1, config.shape[0]):
        psi = np.kron(psi, amps[r])
    return psi


def config_angles(config: np.ndarray):
    """(theta, phi) arrays for an (n, 3) array of unit vectors."""
    config = np.asarray(config, dtype=float)
    theta = np.arccos(np.clip(config[..., 2], -1.0, 1.0))
    phi = np.arctan2(config[..., 1], config[..., 0]) % (2 * np.pi)
    return theta, phi


def overlap(S: SpinMagnitude, a: SphericalPoint, b: SphericalPoint) -> complex:
    """<a|b> in closed form.

    Equals [cos(tb/2)cos(ta/2) + e^{i(phi_b - phi_a)} sin(tb/2)sin(ta/2)]^(2S);
    the magnitude is cos(Theta/2)^(2S) with Theta the pairwise angle.
    """
    base = np.cos(b.theta / 2) * np.cos(a.theta / 2) + np.exp(
        1j * (b.phi - a.phi)
    ) * np.sin(b.theta / 2) * np.sin(a.theta / 2)
    return complex(base**S.twoS)


def rotation_matrix(omega: SphericalPoint, t: float) -> np.ndarray:
    """SO(3) rotation about the ray through omega matching conjugation by
    exp(i t omega.S): R v = cos(t) v - sin(t) (omega x v) + (1-cos t)(omega.v) omega.
    """
    n = omega.cartesian
    K = np.array([[0, -n[2], n[1]], [n[2], 0, -n[0]], [-n[1], n[0], 0]])
    return np.cos(t) * np.eye(3) - np.sin(t) * K + (1 - np.cos(t)) * np.outer(n, n)


def rotation_unitary(S: SpinMagnitude, omega: SphericalPoint, t: float) -> np.ndarray:
    """U = exp(i t (omega . S)); satisfies U (O.S) U+ = (R_{omega,t} O) . S."""
    ops = build_spin_operators(S)
    return expm(1j * t * ops.dotted(omega.cartesian))


@dataclass(frozen=True)
class DistanceBundle:
    """The l1, squared-l2, and mixed distances between two configurations."""

    l1: float
    l2sq: float
    mixed: float
    sqrtS_l1: float
    eta: float = ETA


def config_distances(S: SpinMagnitude, a: np.ndarray, b: np.ndarray) -> DistanceBundle:
    """Distance bundle between configurations on the same site set.

    mixed = sum_r min(sqrt(S)|a_r - b_r|, S|a_r - b_r|^2).
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"site-set mismatch: {a.shape} vs {b.shape}")
    r = np.linalg.norm(a - b, axis=-1)
    s = S.S
    mixed = float(np.minimum(sqrt(s) * r, s * r**2).sum())
    l1 = float(r.sum())
    return DistanceBundle(
        l1=l1, l2sq=float((r**2).sum()), mixed=mixed, sqrtS_l1=sqrt(s) * l1
    )


def sample_sphere(rng: np.random.Generator, n: int) -> np.ndarray:
    """n independent uniform points on the unit sphere, shape (n, 3)."""
    z = rng.uniform(-1.0, 1.0, n)
    phi = rng.uniform(0.0, 2 * np.pi, n)
    rho = np.sqrt(1.0 - z**2)
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def kron_all(mats) -> np.ndarray:
    """Kronecker product of a sequence of matrices, left to right."""
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def embed_operator(op: np.ndarray, sites, n_sites: int, dim: int) -> np.ndarray:
    """Place a k-site operator on the given (ordered, distinct) sites of an
    n-site chain of local dimension dim, identity elsewhere.
    """
    sites = list(sites)
    k = len(sites)
    if op.shape != (dim**k, dim**k):
        raise ValueError("operator shape does not match len(sites)")
    full = op.reshape((dim,) * (2 * k))
    rest = [r for r in range(n_sites) if r not in sites]
    eye = np.eye(dim ** len(rest), dtype=complex).reshape((dim,) * (2 * len(rest)))
    # outer product, then permute site axes into chain order
    big = np.tensordot(full, eye, axes=0)
    # axes: out(sites..), in(sites..), out(rest..), in(rest..)
    out_axes = {s: i for i, s in enumerate(sites)}
    out_axes.update({s: 2 * k + i for i, s in enumerate(rest)})
    in_axes = {s: k + i for i, s in enumerate(sites)}
    in_axes.update({s: 2 * k + len(rest) + i for i, s in enumerate(rest)})
    perm = [out_axes[s] for s in range(n_sites)] + [in_axes[s] for s in range(n_sites)]
    D = dim**n_sites
    return big.transpose(perm).reshape(D, D)
