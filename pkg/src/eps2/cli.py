"""Command line: ``eps2 <task> --config FILE`` and ``eps2 verify --suite NAME``.

Exit status is 0 when every task ran and every verdict is PASS, 1 when a
task failed or a verdict is FAIL, and 2 for configuration or scene errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import SUITE_NAMES, TASKS, ConfigError, RunConfig, from_dict, load_config
from .geometry import SceneError, load_scene
from .reports import emit_plotdata, write_json
from .suites import task_seed
from .tasks import RUNNERS


def _stems(tasks: list[str]) -> list[str]:
    """Output stem per task; repeated tasks get their list index appended."""
    return [t if tasks.count(t) == 1 else f"{t}-{i}" for i, t in enumerate(tasks)]


def run(cfg: RunConfig, log=print) -> int:
    """Execute every task of ``cfg`` and write reports plus ``manifest.json``."""
    scene = None
    path = cfg.scene_path()
    if path is not None:
        try:
            scene = load_scene(path)
        except SceneError as exc:
            log(f"error: {cfg.scene}: {exc.path}: {exc.message}", file=sys.stderr)
            return 2
        except OSError as exc:
            log(f"error: {cfg.scene}: cannot read: {exc.strerror}", file=sys.stderr)
            return 2
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        log(f"error: {out}: cannot create output directory: {exc.strerror}", file=sys.stderr)
        return 2
    status = 0
    entries = []
    for i, (task, stem) in enumerate(zip(cfg.tasks, _stems(cfg.tasks))):
        seed = task_seed(cfg.seed, i)
        entry = {"task": task, "seed": seed, "stem": stem}
        try:
            result = RUNNERS[task](cfg.params[task], scene, seed, cfg.jobs)
        except (ValueError, OSError, ArithmeticError) as exc:
            log(f"{stem}: failed: {exc}", file=sys.stderr)
            entry["error"] = str(exc)
            entries.append(entry)
            status = 1
            continue
        if task == "corona":
            res, report = result
            files = emit_plotdata(res, out, stem)
        else:
            report = result
            files = emit_plotdata(report, out, stem)
        files.append(write_json(out / f"{stem}.json", report))
        entry["files"] = sorted(f.name for f in files)
        verdict = report.get("verdict")
        if verdict is not None:
            entry["verdict"] = verdict
            if verdict != "PASS":
                status = 1
        entries.append(entry)
        log(f"{stem}: {verdict or 'done'} ({len(files)} files)")
    write_json(out / "manifest.json", {"version": __version__, "config": cfg.resolved(), "tasks": entries})
    return status


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eps2", description="Square-function coefficients, capacities and corona runs.")
    p.add_argument("command", choices=TASKS + ("run",), help="task to run, or 'run' for the task list of the config")
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--jobs", type=int, help="worker processes (overrides EPS2_JOBS and the config)")
    p.add_argument("--out", help="output directory (overrides EPS2_OUT and the config)")
    p.add_argument("--suite", choices=SUITE_NAMES, action="append",
                   help="verification suite; may be repeated (verify only)")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.suite and args.command != "verify":
        print("error: --suite applies to the verify command only", file=sys.stderr)
        return 2
    if args.command == "run" and not args.config:
        print("error: run needs --config", file=sys.stderr)
        return 2
    overrides = {"seed": args.seed, "jobs": args.jobs, "out": args.out}
    if args.command != "run":
        overrides["tasks"] = [args.command]
    try:
        if args.config:
            cfg = load_config(args.config, **overrides)
        elif args.command == "verify":
            cfg = from_dict({}, **overrides)
        else:
            print(f"error: {args.command} needs --config", file=sys.stderr)
            return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.suite:
        cfg.params["verify"]["suites"] = list(args.suite)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
