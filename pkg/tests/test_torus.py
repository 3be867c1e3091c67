"""Torus tiling, reflections, contour enumeration, and the Peierls sum."""

import itertools

import numpy as np
import pytest

from spinboard.su2kit import sample_sphere
from spinboard.torus import (
    BlockEvent,
    abs_projection_event,
    build_torus,
    cap_event,
    enumerate_contours,
    parity,
    peierls_sum,
    reflect_config,
    reflect_site_map,
    sigma_flip,
)


def test_tiling_counts():
    g = build_torus(2, 4, 2)
    assert g.n_blocks == 4
    assert build_torus(3, 6, 2).n_blocks == 27
    # blocks tile the torus disjointly
    all_sites = np.concatenate([g.block_sites(t) for t in range(g.n_blocks)])
    assert sorted(all_sites) == list(range(g.n_sites))


def test_divisibility_error():
    with pytest.raises(ValueError):
        build_torus(2, 4, 3)
    with pytest.raises(ValueError):
        build_torus(2, 5, 1)


def test_neighbor_maps_periodic():
    g = build_torus(2, 4, 2)
    nb = g.neighbor_indices(0)
    # moving L times returns to start
    idx = np.arange(g.n_sites)
    cur = idx
    for _ in range(g.L):
        cur = nb[cur]
    assert np.array_equal(cur, idx)


def test_sigma_is_involution():
    rng = np.random.default_rng(0)
    cfg = sample_sphere(rng, 16)
    assert np.allclose(sigma_flip(sigma_flip(cfg)), cfg)


def test_even_parity_reflection_is_translation():
    g = build_torus(2, 8, 2)
    rng = np.random.default_rng(1)
    cfg = sample_sphere(rng, g.n_sites)
    t = (2, 0)
    out = reflect_config(g, t, cfg)
    # pure translation by B*t
    for r in range(g.n_sites):
        c = g.site_coords[r]
        r2 = g.site_index((c[0] + g.B * t[0], c[1] + g.B * t[1]))
        assert np.allclose(out[r2], cfg[r])


def test_reflection_carries_block0_onto_block_t():
    g = build_torus(2, 8, 2)
    for t in [(1, 0), (1, 1), (3, 2), (0, 3)]:
        perm = reflect_site_map(g, t)
        assert sorted(perm[g.block_sites((0, 0))]) == sorted(g.block_sites(t))


def test_composing_relative_reflection_gives_translation_2Bt():
    # reflecting 0 -> t, then t -> 2t with the same relative motion equals
    # the translation by 2Bt
    g = build_torus(2, 8, 2)
    rng = np.random.default_rng(2)
    cfg = sample_sphere(rng, g.n_sites)
    for t in [(1, 0), (1, 1)]:
        once = reflect_config(g, t, cfg)
        twice = reflect_config(g, t, once)  # same map again: involution + parity
        # vartheta_t composed with itself through the moved frame:
        # perm formulas give perm2[perm[r]] with source at block t
        perm = reflect_site_map(g, t)
        # apply the relative reflection starting from block t: coordinates
        # x_j -> B(t_j + t_j) + ... is equivalent to translating the doubled
        # amount; verify on the site map composition
        comp = perm[perm]
        shift = np.array(t) * 2 * g.B
        for r in range(g.n_sites):
            c = g.site_coords[r]
            # perm is an involution composed with the B t translation twice
            assert comp[r] == r  # elementary check: map applied twice fixes sites
        # translation relation checked on configs: reflecting twice with the
        # sigma flip included restores the original spins
        assert np.allclose(twice, cfg)
        # and the advertised translation by 2Bt equals reflecting 0->t then
        # relabeling the source block, i.e. reflecting by t twice in the
        # factor group: t + t has even parity components
        tt = (2 * t[0], 2 * t[1])
        out = reflect_config(g, tt, cfg)
        for r in range(g.n_sites):
            c = g.site_coords[r]
            r2 = g.site_index((c[0] + shift[0], c[1] + shift[1]))
            assert np.allclose(out[r2], cfg[r])


def test_odd_parity_reflection_conjugates():
    g = build_torus(1, 4, 1)
    rng = np.random.default_rng(3)
    cfg = sample_sphere(rng, 4)
    out = reflect_config(g, (1,), cfg)
    assert parity((1,)) == 1
    # positions 0..3 -> reflection through plane between 0 and 1: r -> 1 - r
    perm = reflect_site_map(g, (1,))
    assert list(perm) == [1, 0, 3, 2]
    assert np.allclose(out[1], sigma_flip(cfg[0][None, :])[0])


def test_cap_event_sigma_invariance():
    rng = np.random.default_rng(4)
    ev = cap_event([0, 0, 1], 0.4)
    assert ev.sigma_invariant and ev.check_sigma_invariance(rng)
    ev2 = abs_projection_event([1, 0, 0], 0.3)
    assert ev2.check_sigma_invariance(rng)
    tilted = cap_event([0.6, 0.8, 0.0], 0.5)
    assert not tilted.sigma_invariant
    assert not tilted.check_sigma_invariance(rng, samples=5000)


def test_heisenberg_good_event_occurs():
    g = build_torus(2, 4, 2)
    ev = cap_event([0, 0, 1], 0.2, "G+")
    cfg = np.tile([np.sin(0.05), 0.0, np.cos(0.05)], (g.n_sites, 1))
    assert ev.occurs(g, cfg, (0, 0))
    cfg[0] = [1.0, 0.0, 0.0]
    assert not ev.occurs(g, cfg, (0, 0))


# ---------------------------------------------------------------------------
# contours


def brute_force_contours(shape, i1, i2):
    """Oracle: filter all subsets by connectivity of set and complement."""
    dims = len(shape)
    n = int(np.prod(shape))
    coords = list(itertools.product(*[range(s) for s in shape]))
    index = {c: i for i, c in enumerate(coords)}

    def neighbors(i):
        out = set()
        for j in range(dims):
            for step in (1, -1):
                cc = list(coords[i])
                cc[j] = (cc[j] + step) % shape[j]
                out.add(index[tuple(cc)])
        out.discard(i)
        return out

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

    out = []
    for bits in range(1, 2**n):
        sub = frozenset(i for i in range(n) if bits >> i & 1)
        if i1 not in sub or i2 in sub:
            continue
        comp = frozenset(range(n)) - sub
        if connected(sub) and connected(comp):
            out.append(sub)
    return sorted(out, key=lambda s: (len(s), tuple(sorted(s))))


def brute_force_boundary(shape, sub):
    dims = len(shape)
    coords = list(itertools.product(*[range(s) for s in shape]))
    index = {c: i for i, c in enumerate(coords)}
    edges = 0
    for i in sub:
        for j in range(dims):
            for step in (1, -1):
                cc = list(coords[i])
                cc[j] = (cc[j] + step) % shape[j]
                if index[tuple(cc)] not in sub:
                    edges += 1
    return edges


@pytest.mark.parametrize("side", [2, 3])
def test_enumeration_matches_brute_force(side):
    g = build_torus(2, 2 * side, 2)  # factor torus side x side
    got = enumerate_contours(g, (0, 0), (1, 0), cap=81)
    want = brute_force_contours((side, side), 0, g.block_index((1, 0)))
    assert [c.sites for c in got] == want
    for c in got:
        assert c.boundary_size == brute_force_boundary((side, side), c.sites)


def test_singleton_contour_boundary():
    for d, L in [(1, 4), (2, 4), (3, 4)]:
        g = build_torus(d, L, 2)
        cs = enumerate_contours(g, 0, 1, cap=4**d)
        singleton = [c for c in cs if len(c.sites) == 1][0]
        assert singleton.boundary_size == 2 * d


def test_contours_t1_eq_t2_error():
    g = build_torus(2, 4, 2)
    with pytest.raises(ValueError):
        enumerate_contours(g, (0, 0), (0, 0))


def test_cap_exceeded():
    g = build_torus(2, 12, 2)  # factor torus 6x6 = 36 > 16
    with pytest.raises(ValueError):
        enumerate_contours(g, (0, 0), (1, 0))


def test_ext_layer_bound():
    g = build_torus(2, 6, 2)
    for c in enumerate_contours(g, (0, 0), (1, 1), cap=81):
        assert c.ext_size >= c.boundary_size / (2 * g.d) - 1e-12


def test_peierls_sum_against_brute_force():
    g = build_torus(2, 4, 2)
    q = 0.01
    got = peierls_sum(g, (0, 0), (1, 0), q)
    subs = brute_force_contours((2, 2), 0, g.block_index((1, 0)))
    want = sum(2 * (4 * q) ** (brute_force_boundary((2, 2), s) / 8) for s in subs)
    assert got == pytest.approx(want, rel=1e-12)


def test_peierls_sum_monotone_and_zero():
    g = build_torus(2, 6, 2)
    assert peierls_sum(g, (0, 0), (1, 0), 0.0, cap=81) == 0.0
    qs = np.linspace(0.0, 0.25, 11)
    vals = [peierls_sum(g, (0, 0), (1, 0), q, cap=81) for q in qs]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        peierls_sum(g, (0, 0), (1, 0), 0.3)
