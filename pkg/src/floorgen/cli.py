"""``floorgen`` command line interface."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from . import synth
from .annotate import DrawingSet, annotate_from_drawing, write_label_file
from .config import PipelineConfig
from .errors import FloorgenError, StageError
from .evaluate import evaluate_pair
from .floorplan import read_floorplan, write_floorplan
from .pcio import load_point_cloud, save_point_cloud
from .pipeline import Fixture, grid_search, run_pipeline
from .preprocess import detect_levels

EXIT_OK, EXIT_INPUT, EXIT_STAGE = 0, 2, 3

_INPUT_ERRORS = (FileNotFoundError, IsADirectoryError, PermissionError, ValueError, ValidationError,
                 json.JSONDecodeError, FloorgenError)


def _config(path: Optional[str]) -> PipelineConfig:
    return PipelineConfig.load(path) if path else PipelineConfig()


def cmd_run(args) -> int:
    cfg = _config(args.config)
    fp, report = run_pipeline(args.input, labels=args.labels, drawing=args.drawing, config=cfg, seed=args.seed)
    write_floorplan(fp, args.out, "json")
    if args.svg:
        write_floorplan(fp, args.svg, "svg")
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_json(), indent=2) + "\n")
    return EXIT_OK


def cmd_annotate(args) -> int:
    cfg = _config(args.config)
    cloud = load_point_cloud(args.input)
    drawing = DrawingSet.from_json(args.drawing)
    lv = cfg.levels
    levels, _ = detect_levels(cloud, lv.bin_size, lv.peak_prominence, lv.min_story_height, lv.median_contrast)
    labeled = annotate_from_drawing(cloud, drawing, levels, cfg.annotation.params())
    write_label_file(args.out, labeled.labels)
    return EXIT_OK


def cmd_synth(args) -> int:
    names = list(synth.FIXTURES) if args.fixture == "all" else [args.fixture]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in names:
        spec = synth.fixture(name, args.seed, args.density, args.sigma)
        cloud, gt = synth.generate_building(spec)
        ext = "xyz" if args.format == "xyz" else "ply"
        save_point_cloud(cloud.with_labels(None), out / f"{name}.{ext}",
                         "xyz" if args.format == "xyz" else "ply-binary-le")
        write_label_file(out / f"{name}.labels.txt", cloud.labels)
        write_floorplan(gt, out / f"{name}.gt.json", "json")
        (out / f"{name}.spec.json").write_text(json.dumps(spec.to_json(), indent=2) + "\n")
        print(f"{name}: {len(cloud)} points -> {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args.config)
    rep = evaluate_pair(read_floorplan(args.pred), read_floorplan(args.gt), cfg.evaluation.to_eval())
    if args.out:
        Path(args.out).write_text(rep.dumps())
    sys.stdout.write(rep.table(args.name or Path(args.pred).stem))
    return EXIT_OK


def load_corpus(directory, geometric: bool = False) -> List[Fixture]:
    """Fixtures written by ``floorgen synth``: ``<name>.gt.json`` plus cloud and labels."""
    d = Path(directory)
    out = []
    for gt_path in sorted(d.glob("*.gt.json")):
        name = gt_path.name[: -len(".gt.json")]
        cloud = next((d / f"{name}.{e}" for e in ("ply", "xyz") if (d / f"{name}.{e}").exists()), None)
        if cloud is None:
            raise FileNotFoundError(f"no cloud for fixture {name} in {d}")
        labels = d / f"{name}.labels.txt"
        out.append(Fixture(name, cloud, read_floorplan(gt_path),
                           labels=None if geometric or not labels.exists() else labels))
    if not out:
        raise FileNotFoundError(f"no *.gt.json fixtures in {d}")
    return out


def cmd_gridsearch(args) -> int:
    corpus = load_corpus(args.corpus, args.geometric)
    grid = json.loads(Path(args.grid).read_text())
    if not isinstance(grid, dict) or not all(isinstance(v, list) and v for v in grid.values()):
        raise ValueError("grid must map dotted config keys to non-empty lists")
    result = grid_search(corpus, grid, _config(args.config))
    fields = list(result.table[0].keys()) if result.table else []
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(result.table)
    if args.best_config:
        Path(args.best_config).write_text(result.best.dumps())
    print(json.dumps(result.best_point, sort_keys=True))
    return EXIT_OK


def cmd_render(args) -> int:
    write_floorplan(read_floorplan(args.plan), args.out, "svg")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="floorgen", description="Floorplans from labeled building point clouds.")
    p.add_argument("--print-default-config", action="store_true", help="print the default config JSON and exit")
    sub = p.add_subparsers(dest="command")

    r = sub.add_parser("run", help="point cloud to floorplan")
    r.add_argument("--input", required=True)
    src = r.add_mutually_exclusive_group()
    src.add_argument("--labels", help="per-point label file")
    src.add_argument("--drawing", help="drawing polylines JSON for pseudo-annotation")
    r.add_argument("--config")
    r.add_argument("--out", required=True)
    r.add_argument("--svg")
    r.add_argument("--report", help="write the stage report JSON here")
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("annotate", help="pseudo-annotate a cloud from drawing polylines")
    a.add_argument("--input", required=True)
    a.add_argument("--drawing", required=True)
    a.add_argument("--config")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_annotate)

    s = sub.add_parser("synth", help="write synthetic fixtures")
    s.add_argument("--fixture", default="all", choices=["all", *synth.FIXTURES])
    s.add_argument("--out-dir", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--density", type=float, default=770.0)
    s.add_argument("--sigma", type=float, default=0.002)
    s.add_argument("--format", choices=["ply", "xyz"], default="ply")
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("evaluate", help="compare a predicted plan with ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--out")
    e.add_argument("--config")
    e.add_argument("--name", help="method name for the printed row")
    e.set_defaults(func=cmd_evaluate)

    g = sub.add_parser("gridsearch", help="tune config values over a fixture corpus")
    g.add_argument("--corpus", required=True)
    g.add_argument("--grid", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--config")
    g.add_argument("--best-config")
    g.add_argument("--geometric", action="store_true", help="ignore label files")
    g.set_defaults(func=cmd_gridsearch)

    v = sub.add_parser("render", help="floorplan JSON to SVG")
    v.add_argument("--plan", required=True)
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_render)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_default_config:
        sys.stdout.write(PipelineConfig().dumps())
        return EXIT_OK
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except StageError as e:
        print(f"floorgen: {e}", file=sys.stderr)
        return EXIT_INPUT if e.stage == "load" else EXIT_STAGE
    except _INPUT_ERRORS as e:
        print(f"floorgen: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
