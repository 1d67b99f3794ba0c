import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import flat_ball_count, flat_distance_oracle, greedy_cover_reference
from ricciflow.distances import (
    ball,
    diameter,
    geodesic_distance,
    gromov_cover,
    metric_graph,
    multi_source_distances,
)
from ricciflow.errors import ConfigError, UnsupportedFamilyError
from ricciflow.manifolds import (
    build_su2_metric,
    build_torus_metric,
    build_warped_sphere_metric,
    flat_index,
)


def test_axis_distance_is_exact(flat16):
    d = geodesic_distance(flat16, 0)
    opposite = flat_index(flat16.model, (8, 0, 0))
    assert d.dist[opposite] == 0.5
    assert d.dist[0] == 0.0


def test_flat_distances_match_closed_form(flat16):
    d = geodesic_distance(flat16, 0)
    want = flat_distance_oracle(16, 3, 1.0)
    assert np.allclose(d.dist, want, atol=1e-12)


def test_distance_symmetry_random_pairs(flat8, rng):
    n = flat8.model.node_count
    graph = metric_graph(flat8)
    pairs = rng.integers(0, n, size=(50, 2))
    rows = multi_source_distances(flat8, pairs[:, 0], graph=graph)
    cols = multi_source_distances(flat8, pairs[:, 1], graph=graph)
    for k in range(50):
        assert rows[k, pairs[k, 1]] == cols[k, pairs[k, 0]]


def test_triangle_inequality_on_sampled_triples(flat8, rng):
    n = flat8.model.node_count
    graph = metric_graph(flat8)
    triples = rng.integers(0, n, size=(30, 3))
    srcs = np.unique(triples)
    rows = {int(s): multi_source_distances(flat8, [s], graph=graph)[0] for s in srcs}
    for a, b, c in triples:
        ab = rows[int(a)][b]
        bc = rows[int(b)][c]
        ac = rows[int(a)][c]
        assert ac <= ab + bc + 1e-12


def test_round_sphere_arc_distances(round48):
    d = geodesic_distance(round48, 0)
    equator = 24
    assert abs(d.dist[equator] - np.pi / 2.0) < 1e-3
    assert abs(diameter(round48) - np.pi) < 1e-3


def test_flat_diameter_closed_form(flat16):
    assert abs(diameter(flat16) - np.sqrt(3.0) / 2.0) < 1e-12


def test_perturbed_diameter_conformal_sandwich(bumpy16):
    flat_diam = np.sqrt(3.0) / 2.0
    d = diameter(bumpy16)
    assert np.exp(-0.1) * flat_diam <= d <= np.exp(0.1) * flat_diam


def test_su2_has_no_distance_structure():
    g = build_su2_metric(1.0, 1.0, 1.0)
    with pytest.raises(UnsupportedFamilyError):
        geodesic_distance(g, 0)
    with pytest.raises(UnsupportedFamilyError):
        diameter(g)


def test_ball_smaller_than_spacing_is_singleton(flat16):
    d = geodesic_distance(flat16, 0)
    b = ball(d, 0.5 / 16)
    assert b.nodes.tolist() == [0]


def test_ball_of_diameter_is_everything(flat8):
    d = geodesic_distance(flat8, 3)
    b = ball(d, diameter(flat8))
    assert b.node_count == flat8.model.node_count


def test_ball_count_matches_enumeration(flat16):
    d = geodesic_distance(flat16, 0)
    b = ball(d, 0.25)
    assert b.node_count == flat_ball_count(16, 3, 1.0, 0.25)


def test_ball_rejects_nonpositive_radius(flat8):
    d = geodesic_distance(flat8, 0)
    with pytest.raises(ConfigError):
        ball(d, 0.0)


def test_cover_single_ball_at_diameter(flat8):
    cover = gromov_cover(flat8, 0, diameter(flat8) + 0.01)
    assert cover.count == 1
    assert cover.multiplicity == 1


def test_cover_matches_reference_greedy(flat16):
    graph = metric_graph(flat16)
    center = flat_index(flat16.model, (3, 7, 2))
    radius = 0.2
    cover = gromov_cover(flat16, center, radius)
    from_center = multi_source_distances(flat16, [center], graph=graph)[0]
    rows = {}

    def row(node):
        if node not in rows:
            rows[node] = multi_source_distances(flat16, [node], graph=graph)[0]
        return rows[node]

    want = greedy_cover_reference(from_center, center, radius, row)
    assert cover.centers == want


def test_cover_count_nonincreasing_in_radius(flat16):
    # Monotone decrease is a saturation effect: once the doubled ball
    # starts wrapping the torus, each covering ball eats a growing
    # fraction of it. Below that scale N hovers near a lattice-dependent
    # constant and is not monotone.
    counts = [gromov_cover(flat16, 0, r).count for r in (0.25, 0.3, 0.35, 0.4)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_cover_invariants(flat16):
    graph = metric_graph(flat16)
    center, radius = 17, 0.18
    cover = gromov_cover(flat16, center, radius)
    from_center = multi_source_distances(flat16, [center], graph=graph)[0]
    target = np.flatnonzero(from_center <= 2 * radius)
    rows = multi_source_distances(flat16, cover.centers, graph=graph)
    assert np.all(rows[:, target].min(axis=0) <= radius + 1e-12)
    assert np.all(from_center[cover.centers] <= 1.5 * radius + 1e-12)
    assert cover.multiplicity >= 1


def test_cover_rejects_unresolvable_radius(flat16):
    with pytest.raises(ConfigError):
        gromov_cover(flat16, 0, 0.1 / 16)


def test_warped_ball_is_latitude_band(round48):
    d = geodesic_distance(round48, 0)
    b = ball(d, 0.5)
    assert np.array_equal(b.nodes, np.arange(b.node_count))
    assert np.all(np.diff(b.mask.astype(int)) <= 0)


@settings(max_examples=20, deadline=None)
@given(
    center=st.integers(0, 16**3 - 1),
    radius=st.floats(0.15, 0.45),
)
def test_cover_invariants_generic(flat16, center, radius):
    cover = gromov_cover(flat16, center, radius)
    graph = metric_graph(flat16)
    from_center = multi_source_distances(flat16, [center], graph=graph)[0]
    target = np.flatnonzero(from_center <= 2 * radius)
    rows = multi_source_distances(flat16, cover.centers, graph=graph)
    assert np.all(rows[:, target].min(axis=0) <= radius + 1e-12)
    assert np.all(from_center[cover.centers] <= 1.5 * radius + 1e-12)
