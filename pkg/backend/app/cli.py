"""
Command-line front end for untangle.

    untangle detect A.obj B.obj [--oriented a|b|both] [--json out.jsonl] [--dump-stencils] [--expect-clean]
    untangle untangle A.obj B.obj --oriented a|b|both [--post-distance d] [--max-iters n] ...
    untangle simulate scene.json [--frames n] [--output-dir dir]
    untangle experiment spike_sheet|two_tori|interval_sweep [--output-dir dir]

Exit codes: 0 success / Resolved, 1 usage, IO or parse error,
2 iteration budget exhausted, 3 detect --expect-clean found crossings.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import pandas as pd

try:
    # Try importing with the full package path (for local development)
    from untangle.backend.app.config import Settings
    from untangle.backend.app.models import DiffusionConfig, UntangleConfig
    from untangle.backend.geometry.dcd import EdgeFaceIntersection, find_intersections, write_intersections_jsonl
    from untangle.backend.geometry.errors import UntangleError
    from untangle.backend.geometry.mesh import TriangleMesh, load_obj, save_obj
    from untangle.backend.geometry.stencil import build_stencils, write_stencils_jsonl
    from untangle.backend.geometry.untangler import detection_directions, untangle
    from untangle.backend.simulation.base import scenario_registry
    from untangle.backend.simulation.dynamics import run_scenario
    from untangle.backend.simulation.scenarios import register_default_scenarios
    from untangle.backend.simulation.scene import load_scene
except ImportError:
    # Fall back to relative import (for installed / in-tree use)
    from backend.app.config import Settings
    from backend.app.models import DiffusionConfig, UntangleConfig
    from backend.geometry.dcd import EdgeFaceIntersection, find_intersections, write_intersections_jsonl
    from backend.geometry.errors import UntangleError
    from backend.geometry.mesh import TriangleMesh, load_obj, save_obj
    from backend.geometry.stencil import build_stencils, write_stencils_jsonl
    from backend.geometry.untangler import detection_directions, untangle
    from backend.simulation.base import scenario_registry
    from backend.simulation.dynamics import run_scenario
    from backend.simulation.scenarios import register_default_scenarios
    from backend.simulation.scene import load_scene

logger = logging.getLogger("untangle.cli")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_EXHAUSTED = 2
EXIT_NOT_CLEAN = 3


class UsageError(Exception):
    """Bad command-line usage (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for budget exhaustion
    def error(self, message: str) -> None:
        raise UsageError(f"{self.prog}: {message}")


def _add_pair_arguments(parser: argparse.ArgumentParser, oriented_default: Optional[str]) -> None:
    parser.add_argument("mesh_a", type=Path, help="First mesh (OBJ)")
    parser.add_argument("mesh_b", type=Path, help="Second mesh (OBJ)")
    parser.add_argument("--oriented", choices=["a", "b", "both"], default=oriented_default,
                        help="Which mesh carries front/back orientation")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads (1 is bitwise deterministic)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="untangle", description="Resolve interpenetrations between triangle meshes.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    detect = subparsers.add_parser("detect", help="Count edge-face intersections")
    _add_pair_arguments(detect, oriented_default="b")
    detect.add_argument("--json", dest="json_path", type=Path, help="Write intersection records as JSON lines")
    detect.add_argument("--dump-stencils", action="store_true", help="Add penetration stencil records to the dump")
    detect.add_argument("--expect-clean", action="store_true", help="Exit 3 if any intersection is found")

    repair = subparsers.add_parser("untangle", help="Resolve interpenetration")
    _add_pair_arguments(repair, oriented_default=None)
    repair.add_argument("--post-distance", type=float, default=0.0, help="Target distance d after response (m)")
    repair.add_argument("--max-iters", type=int, default=50)
    repair.add_argument("--diffusion-rings", type=int, default=DiffusionConfig().rings)
    repair.add_argument("--diffusion-iters", type=int, default=DiffusionConfig().iters)
    repair.add_argument("--snapshot-every", type=int, default=None, help="Write OBJ snapshots every k iterations")
    repair.add_argument("--damping", action="store_true", help="Damp corrections when the intersection count oscillates")
    repair.add_argument("--report-self-intersections", action="store_true")
    repair.add_argument("--output-dir", type=Path, default=None)

    simulate = subparsers.add_parser("simulate", help="Run a scene")
    simulate.add_argument("scene", type=Path, help="Scene JSON")
    simulate.add_argument("--frames", type=int, default=None, help="Number of output frames (overrides steps)")
    simulate.add_argument("--threads", type=int, default=None)
    simulate.add_argument("--output-dir", type=Path, default=None)

    experiment = subparsers.add_parser("experiment", help="Run a shipped experiment")
    experiment.add_argument("name", help="Scenario name")
    experiment.add_argument("--output-dir", type=Path, default=None)
    return parser


def configure_logging(settings: Settings) -> None:
    logging.basicConfig(
        level=settings.log_level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%H:%M:%S",
    )
    logging.getLogger("untangle").setLevel(settings.log_level)
    if not settings.log_level_known:
        logger.warning(f"Unknown UNTANGLE_LOG value '{settings.UNTANGLE_LOG}'; using info")


def load_pair(args: argparse.Namespace) -> Tuple[TriangleMesh, TriangleMesh]:
    """Load both meshes with the --oriented designation applied and distinct names."""
    oriented = args.oriented
    name_a, name_b = args.mesh_a.stem, args.mesh_b.stem
    if name_a == name_b:
        name_a, name_b = f"{name_a}_a", f"{name_b}_b"
    mesh_a = load_obj(args.mesh_a, oriented=oriented in ("a", "both"), name=name_a)
    mesh_b = load_obj(args.mesh_b, oriented=oriented in ("b", "both"), name=name_b)
    return mesh_a, mesh_b


def _threads(args: argparse.Namespace, settings: Settings) -> int:
    threads = args.threads if args.threads is not None else settings.UNTANGLE_THREADS
    if threads < 1:
        raise UsageError("--threads must be at least 1")
    return threads


def cmd_detect(args: argparse.Namespace, settings: Settings) -> int:
    """Print the intersection count over every oriented direction."""
    mesh_a, mesh_b = load_pair(args)
    threads = _threads(args, settings)
    records: List[EdgeFaceIntersection] = []
    for edge_mesh, face_mesh in detection_directions(mesh_a, mesh_b, alternate=False):
        records.extend(find_intersections(edge_mesh, face_mesh, threads=threads))
    print(f"{len(records)} intersections")

    stencils = build_stencils(records, {mesh_a.name: mesh_a, mesh_b.name: mesh_b}) if args.dump_stencils else []
    if args.json_path is not None:
        write_intersections_jsonl(records, args.json_path)
        if stencils:
            write_stencils_jsonl(stencils, args.json_path, append=True)
        logger.info(f"Wrote {len(records)} intersection and {len(stencils)} stencil records to {args.json_path}")
    elif stencils:
        for stencil in stencils:
            print(json.dumps(stencil.to_dict()))

    if args.expect_clean and records:
        return EXIT_NOT_CLEAN
    return EXIT_OK


def cmd_untangle(args: argparse.Namespace, settings: Settings) -> int:
    """Untangle two meshes and write <name>_out.obj for each plus report.json."""
    if args.oriented is None:
        raise UsageError("designate at least one oriented mesh with --oriented a|b|both")
    output_dir = Path(args.output_dir or settings.UNTANGLE_OUTPUT_DIR)
    config = UntangleConfig(
        post_distance=args.post_distance,
        max_iters=args.max_iters,
        diffusion=DiffusionConfig(rings=args.diffusion_rings, iters=args.diffusion_iters),
        threads=_threads(args, settings),
        oscillation_damping=args.damping,
        report_self_intersections=args.report_self_intersections,
        snapshot_every=args.snapshot_every,
        snapshot_dir=str(output_dir / "snapshots") if args.snapshot_every else None,
    )
    mesh_a, mesh_b = load_pair(args)
    (mesh_a, mesh_b), report = untangle(mesh_a, mesh_b, config)

    output_dir.mkdir(parents=True, exist_ok=True)
    for mesh in (mesh_a, mesh_b):
        save_obj(mesh, output_dir / f"{mesh.name}_out.obj")
    (output_dir / "report.json").write_text(report.to_json() + "\n")

    print(report.to_frame().to_markdown(index=False))
    print(f"{report.status.value}: {report.final_intersection_count} intersections after {len(report.iterations)} iterations")
    return EXIT_OK if report.resolved else EXIT_EXHAUSTED


def cmd_simulate(args: argparse.Namespace, settings: Settings) -> int:
    """Run a scene file and write its frames and report."""
    scene = load_scene(args.scene)
    if args.frames is not None:
        if args.frames < 1:
            raise UsageError("--frames must be at least 1")
        scene = scene.with_frames(args.frames)
    if args.threads is not None:
        scene = scene.model_copy(update={"untangle": scene.untangle.model_copy(update={"threads": _threads(args, settings)})})
    output_dir = args.output_dir or scene.output_dir or Path(settings.UNTANGLE_OUTPUT_DIR) / scene.name
    result = run_scenario(scene, str(output_dir))

    frames = pd.DataFrame([frame.model_dump(include={"index", "step", "time", "crossings"}) for frame in result.frames])
    if not frames.empty:
        print(frames.to_markdown(index=False))
    print(f"{len(result.frames)} frames, {len(result.untangle_calls)} untangle calls, written to {output_dir}")
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace, settings: Settings) -> int:
    """Run a registered scenario and write <name>_summary.json."""
    register_default_scenarios()
    scenario = scenario_registry.get(args.name)
    if scenario is None:
        raise UsageError(f"unknown experiment '{args.name}' (available: {', '.join(scenario_registry.list_scenarios())})")
    output_dir = Path(args.output_dir or settings.UNTANGLE_OUTPUT_DIR)
    summary = scenario.run(str(output_dir / args.name))
    output_dir.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(summary, indent=2)
    (output_dir / f"{args.name}_summary.json").write_text(payload + "\n")
    print(payload)
    return EXIT_OK


COMMANDS = {
    "detect": cmd_detect,
    "untangle": cmd_untangle,
    "simulate": cmd_simulate,
    "experiment": cmd_experiment,
}


def main(argv: Optional[List[str]] = None) -> int:
    settings = Settings()
    configure_logging(settings)
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, settings)
    except UsageError as e:
        logger.error(str(e))
        print(str(e), file=sys.stderr)
        return EXIT_ERROR
    except (UntangleError, OSError, ValueError) as e:
        logger.error(f"{type(e).__name__}: {str(e)}")
        print(f"error: {str(e)}", file=sys.stderr)
        return EXIT_ERROR
    except SystemExit as e:
        # --help
        return EXIT_OK if not e.code else EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
