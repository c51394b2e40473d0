"""
Test module for scene loading and validation.

This module tests the scene schema, the conversion into SceneConfig and the
construction of scene meshes.
"""

import json
import os
import shutil
import sys
import tempfile
import unittest
from unittest import mock

import numpy as np

# Add the parent directory to the path so we can import the modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

from backend.app.config import settings
from backend.geometry.errors import SceneConfigError
from backend.geometry.mesh import save_obj
from backend.simulation.scene import build_meshes, load_scene, parse_scene, shipped_scene_path
from backend.tests.fixtures import floor_triangle


def _scene(**overrides):
    document = {
        "name": "test",
        "steps": 4,
        "meshes": [
            {"name": "sheet", "primitive": {"kind": "sheet", "params": {"nx": 4, "ny": 4}}},
            {"name": "ball", "primitive": {"kind": "icosphere", "params": {"subdivisions": 1}}, "oriented": True, "pinned": "all"},
        ],
    }
    document.update(overrides)
    return document


class TestSceneValidation(unittest.TestCase):
    """Test scene documents against the schema."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_shipped_scenes(self):
        for name in ("spike_sheet", "two_tori", "interval_sweep"):
            with self.subTest(scene=name):
                scene = load_scene(shipped_scene_path(name))
                self.assertEqual(scene.name, name)
                meshes = build_meshes(scene)
                self.assertEqual([mesh.name for mesh in meshes], [spec.name for spec in scene.meshes])
                self.assertTrue(any(mesh.oriented for mesh in meshes))

    def test_defaults(self):
        scene = parse_scene(_scene())
        self.assertEqual(scene.dt, 0.005)
        self.assertEqual(scene.collision_interval, 1)
        self.assertEqual(tuple(scene.gravity), (0.0, 0.0, -9.8))
        self.assertEqual(scene.untangle.max_iters, 50)

    def test_bad_field_names_its_path(self):
        with self.assertRaises(SceneConfigError) as context:
            parse_scene(_scene(dt=-1.0))
        self.assertEqual(context.exception.field_path, "dt")

    def test_nested_field_path(self):
        document = _scene()
        document["meshes"][1]["oriented"] = "yes"
        with self.assertRaises(SceneConfigError) as context:
            parse_scene(document)
        self.assertEqual(context.exception.field_path, "meshes.1.oriented")

    def test_unknown_field(self):
        with self.assertRaises(SceneConfigError):
            parse_scene(_scene(speed=3))

    def test_missing_steps(self):
        document = _scene()
        del document["steps"]
        with self.assertRaises(SceneConfigError) as context:
            parse_scene(document)
        self.assertEqual(context.exception.field_path, "(root)")

    def test_untangle_section(self):
        scene = parse_scene(_scene(untangle={"post_distance": 0.001, "diffusion": {"rings": 3}}))
        self.assertEqual(scene.untangle.post_distance, 0.001)
        self.assertEqual(scene.untangle.diffusion.rings, 3)
        self.assertEqual(scene.untangle.diffusion.iters, 20)

    def test_duplicate_mesh_names(self):
        document = _scene()
        document["meshes"][1]["name"] = "sheet"
        with self.assertRaises(SceneConfigError) as context:
            parse_scene(document)
        self.assertEqual(context.exception.field_path, "meshes.1.name")

    def test_malformed_json(self):
        path = os.path.join(self.temp_dir, "broken.json")
        with open(path, "w") as f:
            f.write('{"name": "broken", "steps": ')
        with self.assertRaises(SceneConfigError) as context:
            load_scene(path)
        self.assertEqual(context.exception.field_path, "(root)")

    def test_missing_file(self):
        with self.assertRaises(OSError):
            load_scene(os.path.join(self.temp_dir, "absent.json"))

    def test_scene_dir_override(self):
        path = os.path.join(self.temp_dir, "two_tori.json")
        with open(path, "w") as f:
            json.dump(_scene(name="two_tori"), f)
        with mock.patch.object(settings, "UNTANGLE_SCENE_DIR", self.temp_dir):
            self.assertEqual(shipped_scene_path("two_tori"), path)
            self.assertNotEqual(shipped_scene_path("spike_sheet"), os.path.join(self.temp_dir, "spike_sheet.json"))
        self.assertNotEqual(shipped_scene_path("two_tori"), path)

    def test_with_frames(self):
        scene = parse_scene(_scene(output_interval=5))
        self.assertEqual(scene.with_frames(3).steps, 15)
        self.assertEqual(scene.steps, 4)


class TestBuildMeshes(unittest.TestCase):
    """Test mesh construction from scene entries."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_pins_and_translation(self):
        document = _scene()
        document["meshes"][0].update({"pinned": [0, 3], "translate": [0.0, 0.0, 2.0], "vertex_mass": 0.5})
        sheet, ball = build_meshes(parse_scene(document))
        np.testing.assert_array_equal(np.flatnonzero(sheet.pinned), [0, 3])
        self.assertEqual(sheet.masses[1], 0.5)
        np.testing.assert_allclose(sheet.vertices[:, 2], 2.0)
        self.assertTrue(np.all(ball.pinned))

    def test_pinned_index_out_of_range(self):
        document = _scene()
        document["meshes"][0]["pinned"] = [0, 16]
        with self.assertRaises(SceneConfigError) as context:
            build_meshes(parse_scene(document))
        self.assertEqual(context.exception.field_path, "meshes.0.pinned")

    def test_pressure_needs_closed_mesh(self):
        document = _scene()
        document["meshes"][0]["pressure"] = 1.0
        with self.assertRaises(SceneConfigError) as context:
            build_meshes(parse_scene(document))
        self.assertEqual(context.exception.field_path, "meshes.0.pressure")

    def test_bad_primitive_params(self):
        document = _scene()
        document["meshes"][0]["primitive"]["params"] = {"rows": 3}
        with self.assertRaises(SceneConfigError) as context:
            build_meshes(parse_scene(document))
        self.assertEqual(context.exception.field_path, "meshes.0.primitive.params")

    def test_density_masses(self):
        document = _scene()
        document["meshes"][0]["density"] = 0.2
        sheet, _ = build_meshes(parse_scene(document))
        # default sheet is 2 m x 2 m
        self.assertAlmostEqual(sheet.masses.sum(), 0.8, places=12)

    def test_relative_mesh_path(self):
        save_obj(floor_triangle(), os.path.join(self.temp_dir, "floor.obj"))
        document = _scene()
        document["meshes"][1] = {"name": "floor", "path": "floor.obj", "oriented": True}
        path = os.path.join(self.temp_dir, "scene.json")
        with open(path, "w") as f:
            json.dump(document, f)
        _, floor = build_meshes(load_scene(path))
        self.assertEqual(floor.name, "floor")
        self.assertTrue(floor.oriented)
        self.assertEqual(floor.n_faces, 1)

    def test_missing_mesh_file(self):
        document = _scene()
        document["meshes"][1] = {"name": "floor", "path": "nowhere.obj"}
        with self.assertRaises(SceneConfigError) as context:
            build_meshes(parse_scene(document, base_dir=self.temp_dir))
        self.assertEqual(context.exception.field_path, "meshes.1.path")


if __name__ == "__main__":
    unittest.main()
