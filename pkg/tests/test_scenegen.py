import numpy as np
import pytest

from supercut import (IGNORE, ClassTable, ParameterError, PointCloud,
                      SceneSpec, build_knn_graph, default_class_table,
                      generate_scene, validate_ground_truth)
from supercut.scenegen import oracle_signals
from supercut.superpoints import SuperpointPartition, majority_labels


def test_default_table():
    t = default_class_table()
    assert t.num_classes == 4
    assert not t.is_thing[0]
    assert np.all(t.is_thing[1:])


def test_stuff_only_scene():
    spec = SceneSpec(n_objects=0, ground_points=200)
    cloud = generate_scene(spec)
    assert len(cloud) == 200
    assert len(np.unique(cloud.object)) == 1
    assert np.all(cloud.semantic == 0)


def test_same_seed_identical():
    a = generate_scene(SceneSpec(n_objects=10, seed=42))
    b = generate_scene(SceneSpec(n_objects=10, seed=42))
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.colors, b.colors)
    assert np.array_equal(a.semantic, b.semantic)
    assert np.array_equal(a.object, b.object)


def test_different_seed_differs():
    a = generate_scene(SceneSpec(n_objects=10, seed=1))
    b = generate_scene(SceneSpec(n_objects=10, seed=2))
    assert not np.array_equal(a.positions, b.positions)


def test_fifty_objects_distinct_indices():
    spec = SceneSpec(n_objects=50, seed=5)
    cloud = generate_scene(spec)
    thing = cloud.object[cloud.object >= spec.table.first_thing_index]
    assert len(np.unique(thing)) == 50
    assert len(np.unique(cloud.object)) == 51  # + the stuff ground


def test_ground_truth_always_valid():
    for seed in range(5):
        spec = SceneSpec(n_objects=15, seed=seed)
        cloud = generate_scene(spec)
        assert validate_ground_truth(cloud, spec.table) == []


def test_points_per_object_range():
    spec = SceneSpec(n_objects=20, points_per_object=(30, 50), seed=3)
    cloud = generate_scene(spec)
    for o in np.unique(cloud.object):
        if o >= spec.table.first_thing_index:
            n = np.count_nonzero(cloud.object == o)
            assert 30 <= n <= 50


def test_spec_validation():
    with pytest.raises(ParameterError):
        SceneSpec(min_gap=0.01, jitter_sigma=0.01)
    with pytest.raises(ParameterError):
        SceneSpec(points_per_object=(10, 5))
    with pytest.raises(ParameterError):
        SceneSpec(n_objects=4, grid_spacing=0.3, object_size=0.25)


def test_separability_no_cross_object_knn_edges():
    """Objects are far enough apart that a small-K point graph never links
    two different thing objects directly."""
    spec = SceneSpec(n_objects=16, seed=8)
    cloud = generate_scene(spec)
    g = build_knn_graph(cloud.positions, 4)
    first = spec.table.first_thing_index
    ou = cloud.object[g.edges[:, 0]]
    ov = cloud.object[g.edges[:, 1]]
    both_thing = (ou >= first) & (ov >= first)
    assert not np.any(both_thing & (ou != ov))


# ---------------------------------------------------------------------------
# oracle_signals


def test_oracle_signals_point_level():
    spec = SceneSpec(n_objects=6, seed=2)
    cloud = generate_scene(spec)
    g = build_knn_graph(cloud.positions, 3)
    scores, agreements = oracle_signals(cloud, g, spec.table)
    # one-hot truth
    assert np.array_equal(scores.argmax(1), cloud.semantic)
    assert np.all(scores.max(1) == 1.0)
    # binary agreement = same-object indicator
    same = cloud.object[g.edges[:, 0]] == cloud.object[g.edges[:, 1]]
    assert np.array_equal(agreements, same.astype(float))


def test_oracle_signals_full_class_noise():
    spec = SceneSpec(n_objects=4, seed=2)
    cloud = generate_scene(spec)
    g = build_knn_graph(cloud.positions, 3)
    scores, _ = oracle_signals(cloud, g, spec.table, class_noise=1.0)
    assert np.allclose(scores, 1.0 / spec.table.num_classes)


def test_oracle_signals_corruption_count():
    spec = SceneSpec(n_objects=10, seed=4)
    cloud = generate_scene(spec)
    g = build_knn_graph(cloud.positions, 4)
    clean_scores, clean_a = oracle_signals(cloud, g, spec.table)
    _, noisy_a = oracle_signals(cloud, g, spec.table, agreement_noise=0.2,
                                seed=11)
    changed = np.count_nonzero(clean_a != noisy_a)
    e = len(clean_a)
    assert 0.12 * e < changed < 0.28 * e


def test_oracle_signals_ignore_edges_nan():
    pos = np.zeros((4, 3))
    pos[:, 0] = np.arange(4)
    cloud = PointCloud(pos, semantic=np.array([0, 0, IGNORE, 0]),
                       object=np.array([0, 0, IGNORE, 0]))
    g = build_knn_graph(pos, 1)
    table = ClassTable(["ground"], [False])
    _, agreements = oracle_signals(cloud, g, table)
    eu, ev = g.edges[:, 0], g.edges[:, 1]
    touches = (eu == 2) | (ev == 2)
    assert np.all(np.isnan(agreements[touches]))
    assert not np.any(np.isnan(agreements[~touches]))


def test_oracle_signals_superpoint_level():
    spec = SceneSpec(n_objects=5, seed=6)
    cloud = generate_scene(spec)
    g = build_knn_graph(cloud.positions, 4)
    # group points by true object as the partition
    _, assign = np.unique(cloud.object, return_inverse=True)
    sp = majority_labels(SuperpointPartition(assign), cloud)
    from supercut import superpoint_adjacency
    sg = superpoint_adjacency(assign, g, sp.num_superpoints)
    scores, agreements = oracle_signals(cloud, sg, spec.table, superpoints=sp)
    assert np.array_equal(scores.argmax(1), sp.majority_class)
    # pure object-aligned superpoints never agree across objects
    assert np.all(agreements == 0.0)
