"""
Test module for the command-line front end.

This module runs the CLI entry point in-process and checks exit codes,
printed output and written files.
"""

import io
import json
import os
import shutil
import sys
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout

# Add the parent directory to the path so we can import the modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

from backend.app.cli import EXIT_ERROR, EXIT_EXHAUSTED, EXIT_NOT_CLEAN, EXIT_OK, main
from backend.geometry.dcd import find_intersections_brute_force
from backend.geometry.mesh import load_obj, save_obj
from backend.tests.fixtures import floor_triangle, sphere_pair, stick


class TestCli(unittest.TestCase):
    """Test the untangle command."""

    def setUp(self):
        """Set up the test case."""
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        """Clean up after the test case."""
        shutil.rmtree(self.temp_dir)

    def path(self, *parts):
        return os.path.join(self.temp_dir, *parts)

    def write_mesh(self, mesh, name):
        path = self.path(f"{name}.obj")
        save_obj(mesh, path)
        return path

    def run_cli(self, *argv):
        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = main(list(argv))
        return code, out.getvalue(), err.getvalue()

    def sphere_files(self, distance):
        a, b = sphere_pair(distance=distance)
        return self.write_mesh(a, "left"), self.write_mesh(b, "right")

    def test_detect_disjoint(self):
        a, b = self.sphere_files(3.0)
        code, out, _ = self.run_cli("detect", a, b, "--oriented", "both")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("0 intersections", out)

    def test_detect_writes_jsonl(self):
        edges = self.write_mesh(stick(), "stick")
        faces = self.write_mesh(floor_triangle(), "floor")
        dump = self.path("hits.jsonl")
        code, out, _ = self.run_cli("detect", edges, faces, "--json", dump, "--dump-stencils")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("1 intersections", out)
        with open(dump) as f:
            records = [json.loads(line) for line in f]
        self.assertEqual([r["type"] for r in records], ["intersection", "stencil"])
        self.assertEqual(records[0]["edge_mesh"], "stick")
        self.assertEqual(records[1]["apex"], {"mesh": "stick", "vertex": 0})

    def test_detect_matches_brute_force(self):
        left, right = sphere_pair(distance=1.6)
        a, b = self.write_mesh(left, "left"), self.write_mesh(right, "right")
        code, out, _ = self.run_cli("detect", a, b, "--oriented", "b")
        self.assertEqual(code, EXIT_OK)
        expected = len(find_intersections_brute_force(load_obj(a), load_obj(b, oriented=True)))
        self.assertGreater(expected, 0)
        self.assertIn(f"{expected} intersections", out)

    def test_detect_expect_clean(self):
        edges = self.write_mesh(stick(), "stick")
        faces = self.write_mesh(floor_triangle(), "floor")
        code, _, _ = self.run_cli("detect", edges, faces, "--expect-clean")
        self.assertEqual(code, EXIT_NOT_CLEAN)

    def test_missing_file(self):
        code, _, err = self.run_cli("detect", self.path("absent.obj"), self.path("other.obj"))
        self.assertEqual(code, EXIT_ERROR)
        self.assertIn("error", err)

    def test_bad_obj(self):
        bad = self.path("bad.obj")
        with open(bad, "w") as f:
            f.write("v 0 0 0\nf 1 2 3\n")
        faces = self.write_mesh(floor_triangle(), "floor")
        code, _, _ = self.run_cli("detect", bad, faces)
        self.assertEqual(code, EXIT_ERROR)

    def test_untangle_needs_orientation(self):
        a, b = self.sphere_files(1.6)
        code, _, err = self.run_cli("untangle", a, b)
        self.assertEqual(code, EXIT_ERROR)
        self.assertIn("--oriented", err)

    def test_bad_usage(self):
        code, _, _ = self.run_cli("detect", "--oriented", "sideways")
        self.assertEqual(code, EXIT_ERROR)
        code, _, _ = self.run_cli("frobnicate")
        self.assertEqual(code, EXIT_ERROR)

    def test_help(self):
        code, out, _ = self.run_cli("--help")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("untangle", out)

    def test_untangle_resolves_spheres(self):
        a, b = self.sphere_files(1.6)
        output = self.path("out")
        code, out, _ = self.run_cli(
            "untangle", a, b, "--oriented", "both", "--post-distance", "1e-4", "--max-iters", "20", "--output-dir", output
        )
        self.assertEqual(code, EXIT_OK)
        self.assertIn("Resolved", out)
        with open(os.path.join(output, "report.json")) as f:
            report = json.load(f)
        self.assertEqual(report["status"], "Resolved")
        self.assertEqual(report["final_intersection_count"], 0)

        left, right = os.path.join(output, "left_out.obj"), os.path.join(output, "right_out.obj")
        code, out, _ = self.run_cli("detect", left, right, "--oriented", "both", "--expect-clean")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("0 intersections", out)

    def test_untangle_budget_exhausted(self):
        a, b = self.sphere_files(1.0)
        code, out, _ = self.run_cli("untangle", a, b, "--oriented", "both", "--max-iters", "1", "--output-dir", self.path("out"))
        self.assertEqual(code, EXIT_EXHAUSTED)
        self.assertIn("IterationBudgetExhausted", out)

    def test_untangle_is_deterministic(self):
        a, b = self.sphere_files(1.6)
        outputs = []
        for run in ("one", "two"):
            output = self.path(run)
            self.run_cli("untangle", a, b, "--oriented", "both", "--max-iters", "5", "--output-dir", output)
            with open(os.path.join(output, "left_out.obj"), "rb") as f:
                left = f.read()
            with open(os.path.join(output, "right_out.obj"), "rb") as f:
                right = f.read()
            outputs.append((left, right))
        self.assertEqual(outputs[0], outputs[1])

    def test_same_stems_get_suffixes(self):
        os.makedirs(self.path("x"))
        os.makedirs(self.path("y"))
        a = self.path("x", "ball.obj")
        b = self.path("y", "ball.obj")
        left, right = sphere_pair(distance=3.0)
        save_obj(left, a)
        save_obj(right, b)
        output = self.path("out")
        code, _, _ = self.run_cli("untangle", a, b, "--oriented", "b", "--output-dir", output)
        self.assertEqual(code, EXIT_OK)
        self.assertTrue(os.path.exists(os.path.join(output, "ball_a_out.obj")))
        self.assertTrue(os.path.exists(os.path.join(output, "ball_b_out.obj")))

    def test_simulate_malformed_scene(self):
        scene = self.path("scene.json")
        with open(scene, "w") as f:
            f.write('{"name": "oops", "steps": -3, "meshes": []}')
        code, _, _ = self.run_cli("simulate", scene, "--output-dir", self.path("out"))
        self.assertEqual(code, EXIT_ERROR)

    def test_simulate_frames(self):
        scene = self.path("scene.json")
        with open(scene, "w") as f:
            json.dump({
                "name": "tiny",
                "steps": 100,
                "output_interval": 3,
                "meshes": [
                    {"name": "sheet", "primitive": {"kind": "sheet", "params": {"nx": 5, "ny": 5, "width": 1.0, "height": 1.0}},
                     "translate": [0.0, 0.0, 1.0], "vertex_mass": 0.01, "stiffness": 10.0},
                    {"name": "block", "primitive": {"kind": "cube"}, "oriented": True, "pinned": "all",
                     "translate": [-0.5, -0.5, -1.0]},
                ],
            }, f)
        output = self.path("frames")
        code, out, _ = self.run_cli("simulate", scene, "--frames", "2", "--output-dir", output)
        self.assertEqual(code, EXIT_OK)
        self.assertIn("2 frames", out)
        written = sorted(name for name in os.listdir(output) if name.endswith(".obj"))
        self.assertEqual(written, ["tiny_0000_block.obj", "tiny_0000_sheet.obj", "tiny_0001_block.obj", "tiny_0001_sheet.obj"])
        self.assertTrue(os.path.exists(os.path.join(output, "report.json")))

    def test_unknown_experiment(self):
        code, _, err = self.run_cli("experiment", "nonesuch", "--output-dir", self.path("out"))
        self.assertEqual(code, EXIT_ERROR)
        self.assertIn("spike_sheet", err)


if __name__ == "__main__":
    unittest.main()
