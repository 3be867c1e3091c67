"""Torus geometry, block tiling, reflections, and Peierls contour machinery.

Sites of the d-dimensional torus of side L are indexed in C order of their
coordinate tuples.  Blocks of side B (B | L) tile the torus; block positions
live on the factor torus of side L/B.  Reflections through planes between
sites move the origin block onto any other block; composing with the
spin-space conjugation (y-component flip) for odd-parity factor sites gives
the conjugation-aware reflection used for operator dissemination.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TorusGeometry:
    d: int
    L: int
    B: int
    site_coords: np.ndarray = field(repr=False)  # (n_sites, d)

    @property
    def n_sites(self) -> int:
        return self.L**self.d

    @property
    def factor_side(self) -> int:
        return self.L // self.B

    @property
    def n_blocks(self) -> int:
        return self.factor_side**self.d

    @property
    def block_volume(self) -> int:
        return self.B**self.d

    def site_index(self, coords) -> int:
        idx = 0
        for c in coords:
            idx = idx * self.L + (int(c) % self.L)
        return idx

    def block_index(self, t) -> int:
        idx = 0
        for c in t:
            idx = idx * self.factor_side + (int(c) % self.factor_side)
        return idx

    def block_coords(self, t_index: int):
        out = []
        for _ in range(self.d):
            out.append(t_index % self.factor_side)
            t_index //= self.factor_side
        return tuple(reversed(out))

    def neighbor_indices(self, direction: int, step: int = 1) -> np.ndarray:
        """Flat index of site + step * e_direction for every site."""
        coords = self.site_coords.copy()
        coords[:, direction] = (coords[:, direction] + step) % self.L
        return np.ravel_multi_index(coords.T, (self.L,) * self.d)

    def block_sites(self, t) -> np.ndarray:
        """Flat site indices of the block at factor-torus position t."""
        if isinstance(t, (int, np.integer)):
            t = self.block_coords(int(t))
        corners = [range(self.B * int(tc), self.B * int(tc) + self.B) for tc in t]
        return np.array(
            [self.site_index(c) for c in itertools.product(*corners)], dtype=int
        )

    def bonds(self):
        """All nearest-neighbor bonds as (site, site + e_dir, dir) triples.

        On an L = 2 torus each pair appears once per orientation, which is the
        periodic double-bond convention.
        """
        out = []
        for direction in range(self.d):
            nb = self.neighbor_indices(direction)
            for r in range(self.n_sites):
                out.append((r, int(nb[r]), direction))
        return out


def build_torus(d: int, L: int, B: int) -> TorusGeometry:
    if d < 1:
        raise ValueError("d must be >= 1")
    if L % 2 != 0:
        raise ValueError(f"L must be even, got {L}")
    if L % B != 0:
        raise ValueError(f"block side {B} does not divide L = {L}")
    coords = np.array(list(itertools.product(range(L), repeat=d)), dtype=int)
    return TorusGeometry(d, L, B, coords)


# ---------------------------------------------------------------------------
# reflections and conjugation


def sigma_flip(config: np.ndarray) -> np.ndarray:
    """Spin-space reflection through the xz-plane (phi -> -phi)."""
    out = np.array(config, dtype=float, copy=True)
    out[..., 1] *= -1.0
    return out


def parity(t) -> int:
    return int(sum(int(c) for c in t)) % 2


def reflect_site_map(geom: TorusGeometry, t) -> np.ndarray:
    """Site permutation of the reflection carrying block 0 onto block t.

    Composition of |t_j| elementary reflections through planes between sites
    in each direction: even t_j is the translation by B t_j, odd t_j is
    x_j -> B t_j + B - 1 - x_j (mod L).
    """
    if isinstance(t, (int, np.integer)):
        t = geom.block_coords(int(t))
    coords = geom.site_coords.copy()
    for j, tj in enumerate(t):
        tj = int(tj) % geom.factor_side
        if tj % 2 == 0:
            coords[:, j] = (coords[:, j] + geom.B * tj) % geom.L
        else:
            coords[:, j] = (geom.B * tj + geom.B - 1 - coords[:, j]) % geom.L
    return np.ravel_multi_index(coords.T, (geom.L,) * geom.d)


def reflect_config(geom: TorusGeometry, t, config: np.ndarray) -> np.ndarray:
    """theta_t on configurations: move spins along the reflection map, and
    apply the sigma conjugation when t has odd parity (the vartheta_t action).
    """
    if isinstance(t, (int, np.integer)):
        t = geom.block_coords(int(t))
    perm = reflect_site_map(geom, t)
    out = np.empty_like(np.asarray(config, dtype=float))
    out[perm] = config
    if parity(t) == 1:
        out = sigma_flip(out)
    return out


# ---------------------------------------------------------------------------
# block events


@dataclass(frozen=True)
class BlockEvent:
    """Measurable condition on the spins of one B-block.

    site_predicate, when set, maps an (..., 3) array of unit vectors to a
    boolean array; the event holds on a block iff every site passes, and the
    same condition is used at every site (uniform events, which is what all
    the good/bad families here are).  block_predicate generalizes to bond
    conditions; it receives the (block_volume, 3) spins in block site order
    plus the geometry.
    """

    name: str
    site_predicate: object = None
    block_predicate: object = None
    sigma_invariant: bool = True
    params: tuple = ()
    site_probability: float | None = None  # exact uniform-measure mass, when known
    ell: int = 1  # incompatibility offset: distinct neighbors force a bad
    # block ell lattice units along the joining line (1 for all kinds here)

    def occurs(self, geom: TorusGeometry, config: np.ndarray, t) -> bool:
        spins = np.asarray(config)[geom.block_sites(t)]
        if self.site_predicate is not None:
            return bool(np.all(self.site_predicate(spins)))
        return bool(self.block_predicate(spins, geom))

    def site_mask(self, config: np.ndarray) -> np.ndarray:
        if self.site_predicate is None:
            raise ValueError(f"event {self.name} is not a per-site product event")
        return np.asarray(self.site_predicate(np.asarray(config)))

    def check_sigma_invariance(
        self,
        rng: np.random.Generator,
        samples: int = 1000,
        geom: "TorusGeometry | None" = None,
    ) -> bool:
        """Sampled verification that the event commutes with sigma."""
        from .su2kit import sample_sphere

        if self.site_predicate is not None:
            v = sample_sphere(rng, samples)
            return bool(np.array_equal(self.site_mask(v), self.site_mask(sigma_flip(v))))
        if geom is None:
            raise ValueError("block-predicate events need a geometry to sample on")
        for _ in range(samples):
            cfg = sample_sphere(rng, geom.n_sites)
            if self.occurs(geom, cfg, 0) != self.occurs(geom, sigma_flip(cfg), 0):
                return False
        return True


def cap_event(axis, kappa: float, name: str = "cap") -> BlockEvent:
    """All block spins within angle kappa of the given axis."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    cos_k = np.cos(kappa)

    def pred(v):
        return np.asarray(v) @ axis >= cos_k

    return BlockEvent(
        name=name,
        site_predicate=pred,
        sigma_invariant=bool(abs(axis[1]) < 1e-14),
        params=(tuple(axis), kappa),
        site_probability=(1.0 - np.cos(kappa)) / 2.0,
    )


def abs_projection_event(axis, kappa: float, name: str = "absproj") -> BlockEvent:
    """All block spins with |spin . axis| >= cos(kappa)."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    cos_k = np.cos(kappa)

    def pred(v):
        return np.abs(np.asarray(v) @ axis) >= cos_k

    return BlockEvent(
        name=name,
        site_predicate=pred,
        sigma_invariant=bool(abs(axis[1]) < 1e-14),
        params=(tuple(axis), kappa),
        site_probability=1.0 - np.cos(kappa),
    )


def full_event() -> BlockEvent:
    return BlockEvent(
        name="full",
        site_predicate=lambda v: np.ones(np.asarray(v).shape[:-1], bool),
        site_probability=1.0,
    )


def union_event(a: BlockEvent, b: BlockEvent, name: str | None = None) -> BlockEvent:
    """Block-level union: the block satisfies a or satisfies b."""

    def block_pred(spins, geom):
        for ev in (a, b):
            if ev.site_predicate is not None:
                if bool(np.all(ev.site_predicate(spins))):
                    return True
            elif ev.block_predicate(spins, geom):
                return True
        return False

    return BlockEvent(
        name=name or f"{a.name}|{b.name}",
        block_predicate=block_pred,
        sigma_invariant=a.sigma_invariant and b.sigma_invariant,
    )


def complement_site_event(ev: BlockEvent, name: str | None = None) -> BlockEvent:
    """Sitewise complement of a per-site product event (not the block complement)."""
    pred = ev.site_predicate

    def cpred(v):
        return ~np.asarray(pred(v))

    return BlockEvent(
        name=name or f"not-{ev.name}",
        site_predicate=cpred,
        sigma_invariant=ev.sigma_invariant,
        params=ev.params,
        site_probability=None
        if ev.site_probability is None
        else 1.0 - ev.site_probability,
    )


# ---------------------------------------------------------------------------
# contours on the factor torus


@dataclass(frozen=True)
class ContourSet:
    """Connected block set with connected complement, plus its boundary data."""

    sites: frozenset
    boundary_size: int
    directional_sizes: tuple
    ext_size: int  # |Y_j^ext| for the maximizing direction/orientation

    @property
    def sorted_sites(self):
        return tuple(sorted(self.sites))


def _factor_neighbors(shape):
    """Neighbor sets on the factor torus (deduplicated, handles side 2)."""
    dims = len(shape)
    n = int(np.prod(shape))
    coords = list(itertools.product(*[range(s) for s in shape]))
    index = {c: i for i, c in enumerate(coords)}
    nbrs = []
    for c in coords:
        s = set()
        for j in range(dims):
            for step in (1, -1):
                cc = list(c)
                cc[j] = (cc[j] + step) % shape[j]
                s.add(index[tuple(cc)])
        s.discard(index[c])
        nbrs.append(sorted(s))
    return coords, index, nbrs, n


def _is_connected(subset: frozenset, nbrs) -> bool:
    if not subset:
        return False
    start = next(iter(subset))
    seen = {start}
    stack = [start]
    while stack:
        cur = stack.pop()
        for nb in nbrs[cur]:
            if nb in subset and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(subset)


def _boundary_data(subset: frozenset, shape, coords, index):
    """Directional boundary-edge counts and the maximal exterior-layer size."""
    dims = len(shape)
    dir_sizes = []
    best_ext = 0
    for j in range(dims):
        edges = 0
        ext_plus, ext_minus = set(), set()
        for i in subset:
            c = list(coords[i])
            for step, ext in ((1, ext_plus), (-1, ext_minus)):
                cc = c.copy()
                cc[j] = (cc[j] + step) % shape[j]
                k = index[tuple(cc)]
                if k not in subset:
                    edges += 1
                    ext.add(k)
        dir_sizes.append(edges)
        best_ext = max(best_ext, len(ext_plus), len(ext_minus))
    # ext layer is only compared for the direction(s) with maximal edge count
    jmax = int(np.argmax(dir_sizes))
    ext_plus, ext_minus = set(), set()
    for i in subset:
        c = list(coords[i])
        for step, ext in ((1, ext_plus), (-1, ext_minus)):
            cc = c.copy()
            cc[jmax] = (cc[jmax] + step) % shape[jmax]
            k = index[tuple(cc)]
            if k not in subset:
                ext.add(k)
    return tuple(dir_sizes), max(len(ext_plus), len(ext_minus))


def enumerate_contours(geom: TorusGeometry, t1, t2, cap: int | None = None):
    """All connected Y in the factor torus with connected complement,
    t1 in Y, t2 not in Y.  Grown recursively from t1; an explicit cap on the
    factor-torus size keeps the enumeration exhaustive but bounded.
    """
    shape = (geom.factor_side,) * geom.d
    coords, index, nbrs, n = _factor_neighbors(shape)
    if cap is None:
        cap = 4**geom.d
    if n > cap:
        raise ValueError(f"factor torus has {n} sites, exceeding cap {cap}")
    i1 = geom.block_index(t1) if not isinstance(t1, (int, np.integer)) else int(t1)
    i2 = geom.block_index(t2) if not isinstance(t2, (int, np.integer)) else int(t2)
    if i1 == i2:
        raise ValueError("t1 and t2 must be distinct")

    # connected-subgraph enumeration: repeatedly extend by a neighbor of the
    # current set, never adding i2, deduplicating by frozenset
    seed = frozenset({i1})
    found = {seed}
    worklist = [seed]
    while worklist:
        current = worklist.pop()
        candidates = set()
        for i in current:
            candidates.update(nbrs[i])
        candidates -= current
        candidates.discard(i2)
        for c in candidates:
            nxt = current | {c}
            if nxt not in found:
                found.add(nxt)
                worklist.append(nxt)

    out = []
    for subset in found:
        comp = frozenset(range(n)) - subset
        if not _is_connected(subset, nbrs) or not _is_connected(comp, nbrs):
            continue
        dir_sizes, ext = _boundary_data(subset, shape, coords, index)
        out.append(
            ContourSet(
                sites=subset,
                boundary_size=sum(dir_sizes),
                directional_sizes=dir_sizes,
                ext_size=ext,
            )
        )
    out.sort(key=lambda c: (len(c.sites), c.sorted_sites))
    return out


def peierls_sum(geom: TorusGeometry, t1, t2, q: float, cap: int | None = None) -> float:
    """sum over contours of 2 (4q)^(|dY| / 4d), exact over the enumerated family."""
    if not (0.0 <= q <= 0.25):
        raise ValueError(f"q must lie in [0, 1/4], got {q}")
    total = 0.0
    for c in enumerate_contours(geom, t1, t2, cap=cap):
        total += 2.0 * (4.0 * q) ** (c.boundary_size / (4.0 * geom.d))
    return total
