"""
Test module for discrete collision detection.

This module tests the segment/triangle predicate, the bounding volume
hierarchy and BVH-accelerated detection against the brute-force oracle.
"""

import json
import os
import shutil
import sys
import tempfile
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

# Add the parent directory to the path so we can import the modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

from backend.app.models import Tolerances
from backend.geometry.dcd import (
    Aabb,
    build_bvh,
    find_intersections,
    find_intersections_brute_force,
    find_self_intersections,
    segment_triangle_batch,
    segment_triangle_intersect,
    write_intersections_jsonl,
)
from backend.geometry.errors import BvhError, OrientationError
from backend.geometry.primitives import grid_sheet, icosphere, torus
from backend.tests.fixtures import floor_triangle, random_rotation, sphere_pair, stick

TRIANGLE = ([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])


def _key(records):
    return [(r.edge_index, r.face_index) for r in records]


class TestSegmentTriangle(unittest.TestCase):
    """Test the exact segment/triangle crossing test."""

    def test_crossing(self):
        hit = segment_triangle_intersect([0.25, 0.25, -1.0], [0.25, 0.25, 1.0], *TRIANGLE)
        self.assertIsNotNone(hit)
        t, b1, b2, b3 = hit
        self.assertAlmostEqual(t, 0.5)
        self.assertAlmostEqual(b1 + b2 + b3, 1.0)
        self.assertAlmostEqual(b1, 0.5)

    def test_miss_outside(self):
        self.assertIsNone(segment_triangle_intersect([2.0, 2.0, -1.0], [2.0, 2.0, 1.0], *TRIANGLE))

    def test_endpoint_on_plane_is_not_a_crossing(self):
        self.assertIsNone(segment_triangle_intersect([0.25, 0.25, 0.0], [0.25, 0.25, 1.0], *TRIANGLE))

    def test_coplanar_segment_is_not_a_crossing(self):
        self.assertIsNone(segment_triangle_intersect([-1.0, 0.25, 0.0], [2.0, 0.25, 0.0], *TRIANGLE))

    def test_segment_short_of_plane(self):
        self.assertIsNone(segment_triangle_intersect([0.25, 0.25, 0.5], [0.25, 0.25, 1.0], *TRIANGLE))

    @settings(max_examples=100, deadline=None)
    @given(
        st.floats(-0.2, 1.2), st.floats(-0.2, 1.2), st.floats(-2.0, -0.01),
        st.floats(-0.2, 1.2), st.floats(-0.2, 1.2), st.floats(0.01, 2.0),
    )
    def test_reversed_segment(self, px, py, pz, qx, qy, qz):
        p, q = [px, py, pz], [qx, qy, qz]
        forward = segment_triangle_intersect(p, q, *TRIANGLE)
        backward = segment_triangle_intersect(q, p, *TRIANGLE)
        self.assertEqual(forward is None, backward is None)
        if forward is not None:
            self.assertAlmostEqual(forward[0], 1.0 - backward[0], places=9)

    def test_random_segments_match_orientation_oracle(self):
        rng = np.random.default_rng(77)
        p, q, a, b, c = (rng.normal(size=(10000, 3)) for _ in range(5))
        hit, t, _ = segment_triangle_batch(p, q, a, b, c)

        def orient(u, v, w, x):
            return np.einsum("ij,ij->i", v - u, np.cross(w - u, x - u))

        # p and q on opposite sides of the plane, and the line through them
        # passing every triangle edge with the same handedness
        side_p, side_q = orient(a, b, c, p), orient(a, b, c, q)
        around = np.column_stack([orient(p, q, a, b), orient(p, q, b, c), orient(p, q, c, a)])
        expected = (side_p * side_q < 0) & (np.all(around > 0, axis=1) | np.all(around < 0, axis=1))

        # near-ties fall inside the tolerances and are left out
        clear = np.min(np.abs(np.column_stack([side_p, side_q, around])), axis=1) > 1e-6
        self.assertGreater(np.count_nonzero(expected & clear), 100)
        self.assertGreater(np.count_nonzero(~expected & clear), 100)
        np.testing.assert_array_equal(hit[clear], expected[clear])

        both = hit & clear
        np.testing.assert_allclose(t[both], (side_p / (side_p - side_q))[both], atol=1e-9)


class TestBvh(unittest.TestCase):
    """Test hierarchy construction and queries."""

    def setUp(self):
        rng = np.random.default_rng(7)
        self.lower = rng.uniform(-1.0, 1.0, size=(200, 3))
        self.upper = self.lower + rng.uniform(0.0, 0.2, size=(200, 3))
        self.boxes = [Aabb(tuple(lo), tuple(hi)) for lo, hi in zip(self.lower.tolist(), self.upper.tolist())]

    def test_empty(self):
        with self.assertRaises(BvhError):
            build_bvh([])

    def test_every_primitive_in_one_leaf(self):
        tree = build_bvh(self.boxes)
        leaves = sorted(int(tree.primitive[node]) for node in tree.leaves())
        self.assertEqual(leaves, list(range(200)))
        self.assertEqual(tree.n_primitives, 200)

    def test_parent_boxes_contain_children(self):
        tree = build_bvh(self.boxes)
        for node in range(len(tree)):
            if not tree.is_leaf(node):
                box = tree.node_box(node)
                self.assertTrue(box.contains(tree.node_box(tree.left[node])))
                self.assertTrue(box.contains(tree.node_box(tree.right[node])))

    def test_query_matches_linear_scan(self):
        tree = build_bvh(self.boxes)
        query = Aabb((-0.3, -0.3, -0.3), (0.2, 0.4, 0.1))
        expected = [i for i, box in enumerate(self.boxes) if box.overlaps(query)]
        self.assertEqual(tree.query(query), expected)

    def test_query_point(self):
        tree = build_bvh(self.boxes)
        point = tuple(((self.lower[3] + self.upper[3]) / 2).tolist())
        self.assertIn(3, tree.query_point(point))

    def test_overlapping_pairs_match_linear_scan(self):
        first = build_bvh(self.boxes[:120])
        second = build_bvh(self.boxes[120:])
        mine, theirs = first.overlapping_pairs(second)
        found = sorted(zip(mine.tolist(), theirs.tolist()))
        expected = [
            (i, j) for i, a in enumerate(self.boxes[:120]) for j, b in enumerate(self.boxes[120:]) if a.overlaps(b)
        ]
        self.assertEqual(found, expected)


class TestFindIntersections(unittest.TestCase):
    """Test mesh-mesh detection."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_single_edge_through_face(self):
        records = find_intersections(stick(), floor_triangle())
        self.assertEqual(len(records), 1)
        record = records[0]
        self.assertEqual((record.edge_mesh, record.edge_index, record.face_mesh, record.face_index), ("stick", 0, "face", 0))
        self.assertAlmostEqual(record.t, 0.4)
        np.testing.assert_allclose(record.point, [0.25, 0.25, 0.0], atol=1e-12)

    def test_disjoint_meshes(self):
        a, b = sphere_pair(distance=3.0)
        self.assertEqual(find_intersections(a, b), [])

    def test_face_mesh_must_be_oriented(self):
        with self.assertRaises(OrientationError):
            find_intersections(floor_triangle(), stick())

    def test_matches_brute_force_on_random_pairs(self):
        rng = np.random.default_rng(2024)
        for trial in range(50):
            base = icosphere(1.0, 1 + trial % 2, oriented=True, name="faces")
            noisy = base.vertices + rng.normal(scale=0.03, size=base.vertices.shape)
            face_mesh = base.with_positions(noisy)
            other = icosphere(rng.uniform(0.5, 1.2), 1, name="edges", oriented=False)
            moved = other.vertices @ random_rotation(rng).T + rng.uniform(-1.2, 1.2, size=3)
            edge_mesh = other.with_positions(moved)

            fast = find_intersections(edge_mesh, face_mesh)
            oracle = find_intersections_brute_force(edge_mesh, face_mesh)
            with self.subTest(trial=trial):
                self.assertEqual(_key(fast), _key(oracle))
                for a, b in zip(fast, oracle):
                    self.assertLess(abs(a.t - b.t), 1e-9)

    def test_sheet_through_torus_matches_brute_force(self):
        sheet = grid_sheet(20, 20, width=3.0, height=3.0, center=(0.0, 0.0, 0.05))
        ring = torus(major_sections=16, minor_sections=12)
        fast = find_intersections(sheet, ring)
        self.assertGreater(len(fast), 0)
        self.assertEqual(_key(fast), _key(find_intersections_brute_force(sheet, ring)))

    def test_thread_count_does_not_change_results(self):
        a, b = sphere_pair(distance=1.5)
        self.assertEqual(_key(find_intersections(a, b, threads=1)), _key(find_intersections(a, b, threads=4)))

    def test_box_tolerance_only_affects_culling(self):
        a, b = sphere_pair(distance=1.7)
        loose = find_intersections(a, b, Tolerances(box=1e-2))
        self.assertEqual(_key(loose), _key(find_intersections(a, b)))

    def test_no_self_intersections_on_clean_sphere(self):
        self.assertEqual(find_self_intersections(icosphere(1.0, 2)), [])

    def test_folded_sheet_self_intersects(self):
        sheet = grid_sheet(6, 6, width=1.0, height=1.0)
        positions = sheet.vertices.copy()
        # push one interior column through the row next to it
        positions[2 * 6 + 2] += [0.0, 0.0, 0.5]
        positions[2 * 6 + 3] += [0.0, 0.0, -0.5]
        positions[3 * 6 + 2] += [0.35, 0.0, -0.5]
        folded = sheet.with_positions(positions)
        self.assertEqual(
            _key(find_self_intersections(folded)),
            _key([r for r in find_intersections_brute_force(folded, folded.renamed("copy", oriented=True))
                  if not set(folded.edges.edges[r.edge_index]) & set(folded.faces[r.face_index])]),
        )

    def test_jsonl_dump(self):
        path = os.path.join(self.temp_dir, "hits.jsonl")
        count = write_intersections_jsonl(find_intersections(stick(), floor_triangle()), path)
        self.assertEqual(count, 1)
        with open(path) as f:
            lines = f.read().splitlines()
        self.assertEqual(len(lines), 1)
        record = json.loads(lines[0])
        self.assertEqual(record["type"], "intersection")
        self.assertEqual(record["edge_mesh"], "stick")
        self.assertEqual(len(record["barycentric"]), 3)


if __name__ == "__main__":
    unittest.main()
