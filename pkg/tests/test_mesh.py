import numpy as np
import pytest

from stfosls.mesh import (
    FacetTag,
    bisect,
    boundary_tags_consistent,
    element_measure,
    element_measures,
    element_patch,
    initial_facets,
    is_conforming,
    read_mesh,
    sorted_angles,
    uniform_initial_mesh,
    write_mesh,
)


def test_single_cell_mesh():
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 1, 1)
    assert mesh.n_points == 4
    assert mesh.n_elements == 2
    assert is_conforming(mesh)


def test_two_by_two_facet_tags():
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 2, 2)
    assert mesh.n_points == 9
    assert mesh.n_elements == 8
    counts = {tag: int((mesh.edge_tags == tag).sum()) for tag in FacetTag}
    assert counts[FacetTag.INITIAL] == 2
    assert counts[FacetTag.FINAL] == 2
    assert counts[FacetTag.LATERAL_DIRICHLET] == 4
    assert boundary_tags_consistent(mesh)


def test_invalid_dimensions_rejected():
    with pytest.raises(ValueError):
        uniform_initial_mesh(0.0, (0.0, 1.0), 1, 1)
    with pytest.raises(ValueError):
        uniform_initial_mesh(1.0, (1.0, 0.0), 1, 1)
    with pytest.raises(ValueError):
        uniform_initial_mesh(1.0, (0.0, 1.0), 0, 1)


def test_bisect_one_of_two_gives_four():
    # the shared diagonal is the refinement edge of both triangles, so
    # marking one forces its neighbor into the closure
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 1, 1)
    refined = bisect(mesh, [0])
    assert refined.n_elements == 4
    assert refined.n_points == 5
    assert is_conforming(refined)
    assert boundary_tags_consistent(refined)


def test_bisect_empty_marks_is_identity():
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 2, 2)
    out = bisect(mesh, [])
    assert np.array_equal(out.points, mesh.points)
    assert np.array_equal(out.elements, mesh.elements)
    assert np.array_equal(out.generation, mesh.generation)
    assert np.array_equal(out.edge_tags, mesh.edge_tags)


def test_bisect_all_on_compatible_mesh_gives_two_children_each():
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 2, 2)
    refined = bisect(mesh, np.arange(mesh.n_elements))
    assert refined.n_elements == 2 * mesh.n_elements
    assert np.all(refined.generation == 1)
    assert is_conforming(refined)


def test_bisect_out_of_range_mark_rejected():
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 1, 1)
    with pytest.raises(IndexError):
        bisect(mesh, [5])


def test_element_measure_reference_values():
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 1, 1)
    # both halves of the unit square
    assert element_measure(mesh, 0) == pytest.approx(0.5, abs=0.0)
    assert element_measure(mesh, 1) == pytest.approx(0.5, abs=0.0)
    for n in (1, 2, 3):
        m = uniform_initial_mesh(1.0, (0.0, 1.0), n, n)
        assert element_measures(m).sum() == pytest.approx(1.0, rel=1e-14)


def test_child_measures_halve():
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 2, 3)
    refined = bisect(mesh, [0, 4])
    parent_area = element_measures(mesh)
    child_area = element_measures(refined)
    for child in range(refined.n_elements):
        parent = refined.refined_from[child]
        depth = refined.generation[child] - mesh.generation[parent]
        assert child_area[child] == pytest.approx(parent_area[parent] / 2.0**depth, rel=1e-12)


def test_element_patch():
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 1, 1)
    assert set(element_patch(mesh, 0)) == {0, 1}
    assert set(element_patch(mesh, 1)) == {0, 1}

    big = uniform_initial_mesh(1.0, (0.0, 1.0), 4, 4)
    for k in range(big.n_elements):
        expected = {
            e
            for e in range(big.n_elements)
            if set(big.elements[e]) & set(big.elements[k])
        }
        assert set(element_patch(big, k)) == expected


def test_element_patch_single_element():
    from dataclasses import replace

    base = uniform_initial_mesh(1.0, (0.0, 1.0), 1, 1)
    single = replace(
        base,
        points=base.points[:3],
        elements=np.array([[0, 1, 2]]),
        generation=np.zeros(1, dtype=np.int64),
        edge_tags=np.zeros((1, 3), dtype=np.int64),
        refined_from=np.zeros(1, dtype=np.int64),
    )
    assert list(element_patch(single, 0)) == [0]


def test_initial_facets():
    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 2, 2)
    touching = [k for k in range(mesh.n_elements) if initial_facets(mesh, k)]
    assert len(touching) == 2
    for k in touching:
        (a, b), = initial_facets(mesh, k)
        assert mesh.points[a, 0] == 0.0 and mesh.points[b, 0] == 0.0
    # elements away from t=0, and elements touching t=0 only at a vertex
    for k in range(mesh.n_elements):
        if k not in touching:
            assert initial_facets(mesh, k) == []


def test_hanging_node_detected():
    from dataclasses import replace

    mesh = uniform_initial_mesh(1.0, (0.0, 1.0), 1, 1)
    # split element 0 by hand without touching its neighbor
    mid = 0.5 * (mesh.points[mesh.elements[0, 0]] + mesh.points[mesh.elements[0, 1]])
    points = np.vstack([mesh.points, mid])
    v0, v1, v2 = mesh.elements[0]
    elements = np.array([[v2, v0, 4], [v1, v2, 4], mesh.elements[1]])
    broken = replace(
        mesh,
        points=points,
        elements=elements,
        generation=np.array([1, 1, 0]),
        edge_tags=np.zeros((3, 3), dtype=np.int64),
        refined_from=np.arange(3),
    )
    assert not is_conforming(broken)


def test_random_refinement_invariants():
    """100 randomized mark sets: conformity, marked subset bisected, one new
    vertex per bisected edge at the parent midpoint, bounded angle classes."""
    rng = np.random.default_rng(7)
    initial = uniform_initial_mesh(1.0, (0.0, 1.0), 2, 2)
    mesh = initial
    ancestor = np.arange(mesh.n_elements)
    class_sets = {k: set() for k in range(initial.n_elements)}

    for trial in range(100):
        marks = rng.choice(mesh.n_elements, size=rng.integers(1, max(2, mesh.n_elements // 4)),
                           replace=False)
        refined = bisect(mesh, marks)
        assert is_conforming(refined)
        assert boundary_tags_consistent(refined)
        assert np.all(element_measures(refined) > 0)

        # every marked element was replaced by at least two descendants
        from collections import Counter

        children = Counter(int(p) for p in refined.refined_from)
        for k in marks:
            assert children[int(k)] >= 2
            descendants = np.flatnonzero(refined.refined_from == k)
            assert np.all(refined.generation[descendants] > mesh.generation[k])

        # every new vertex is the bit-exact midpoint of an edge of the
        # previous mesh (bisection only ever splits existing edges)
        midpoints = set()
        for tri in mesh.elements:
            for a, b in zip(tri, np.roll(tri, -1)):
                midpoints.add((0.5 * (mesh.points[a] + mesh.points[b])).tobytes())
        for new in range(mesh.n_points, refined.n_points):
            assert refined.points[new].tobytes() in midpoints

        ancestor = ancestor[refined.refined_from]
        angles = np.round(sorted_angles(refined), 9)
        for e in range(refined.n_elements):
            class_sets[int(ancestor[e])].add(tuple(angles[e]))
        mesh = refined
        if mesh.n_elements > 10000:
            mesh = initial
            ancestor = np.arange(mesh.n_elements)

    assert max(len(s) for s in class_sets.values()) <= 8


def test_mesh_dump_roundtrip(tmp_path):
    mesh = bisect(uniform_initial_mesh(1.0, (0.0, 2.0), 2, 3), [1, 5])
    path = tmp_path / "mesh.txt"
    write_mesh(mesh, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "spacetime-mesh v1"
    assert lines[1] == f"{mesh.n_points} {mesh.n_elements}"
    back = read_mesh(path)
    assert np.array_equal(back.points, mesh.points)
    assert np.array_equal(back.elements, mesh.elements)
    assert np.array_equal(back.generation, mesh.generation)
    assert np.array_equal(back.edge_tags, mesh.edge_tags)
