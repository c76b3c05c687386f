"""Command-line scenario runner.

    fbmhd <subcommand> [--config PATH ...] [--seed N] [--jobs N] [--dump-fields] [--out DIR]

Each run writes its CSV artifacts (and MHDF1 field dumps with
``--dump-fields``) plus ``manifest.json`` listing every check.  Exit status
is 0 iff every check of every scenario passed; 1 if a check failed, 2 for
configuration errors (nothing is written), 3 if a pipeline raised.
"""
from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
import traceback
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .config import KINDS, ConfigError, load, output_dir
from .fieldio import write_field

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_ERROR = 0, 1, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="fbmhd", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="kind", required=True, metavar="SUBCOMMAND")
    for kind in KINDS:
        s = sub.add_parser(kind)
        s.add_argument("--config", action="append", metavar="PATH",
                       help="scenario file; repeat to run a batch")
        s.add_argument("--seed", type=int, help="overrides the seed in the file")
        s.add_argument("--jobs", type=int, default=1, help="scenarios run in parallel")
        s.add_argument("--dump-fields", action="store_true", help="write MHDF1 field dumps")
        s.add_argument("--out", metavar="DIR", help="output directory")
    return p


def _write_outputs(dest, cfg, outcome, dump_fields, error=None):
    """Stage everything in a sibling temp dir and move it into place."""
    parent = os.path.dirname(os.path.abspath(dest)) or "."
    os.makedirs(parent, exist_ok=True)
    stage = tempfile.mkdtemp(prefix=".stage-", dir=parent)
    try:
        files = []
        if outcome is not None:
            for name, text in sorted(outcome.csv.items()):
                with open(os.path.join(stage, name), "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
                files.append(name)
            if dump_fields:
                for name, (arr, spacing) in sorted(outcome.fields.items()):
                    fname = f"{name}.mhdf"
                    write_field(os.path.join(stage, fname), arr, spacing)
                    files.append(fname)
        checks = [c.as_dict() for c in outcome.checks] if outcome is not None else []
        failures = [c["name"] for c in checks if not c["passed"]]
        manifest = {
            "kind": cfg.kind, "version": __version__, "config_source": cfg.source,
            "config": cfg.resolved(), "passed": error is None and not failures,
            "checks": checks, "failures": failures, "artifacts": files,
            "info": outcome.info if outcome is not None else {},
        }
        if error is not None:
            manifest["error"] = error
        with open(os.path.join(stage, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if os.path.isdir(dest):
            shutil.rmtree(dest)
        os.replace(stage, dest)
    finally:
        if os.path.isdir(stage):
            shutil.rmtree(stage)
    return manifest


def run_scenario(cfg, dest, dump_fields=False):
    """Run one validated scenario and write its artifacts; returns (status, manifest)."""
    from .scenarios import PIPELINES

    try:
        outcome = PIPELINES[cfg.kind](cfg)
    except Exception as exc:  # reported in the manifest, never swallowed silently
        err = f"{type(exc).__name__}: {exc}"
        manifest = _write_outputs(dest, cfg, None, False, error=err)
        traceback.print_exc(file=sys.stderr)
        return EXIT_ERROR, manifest
    manifest = _write_outputs(dest, cfg, outcome, dump_fields)
    return (EXIT_OK if manifest["passed"] else EXIT_FAILED), manifest


def _job(args):
    cfg, dest, dump = args
    status, manifest = run_scenario(cfg, dest, dump)
    return status, dest, manifest["failures"], manifest.get("error")


def main(argv=None):
    args = _parser().parse_args(argv)
    paths = args.config or [None]
    try:
        cfgs = [load(p, args.kind, args.seed) for p in paths]
    except ConfigError as exc:
        print(f"fbmhd: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        print("fbmhd: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    root = output_dir(cfgs[0], args.out)
    if len(cfgs) == 1:
        jobs = [(cfgs[0], root, args.dump_fields)]
    else:
        names = [os.path.splitext(os.path.basename(p))[0] for p in paths]
        if len(set(names)) != len(names):
            print("fbmhd: batch config files need distinct names", file=sys.stderr)
            return EXIT_CONFIG
        jobs = [(c, os.path.join(root, n), args.dump_fields) for c, n in zip(cfgs, names)]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]
    status = EXIT_OK
    for code, dest, failures, error in results:
        if code == EXIT_OK:
            print(f"{dest}: all checks passed")
        elif error:
            print(f"{dest}: error: {error}")
        else:
            print(f"{dest}: failed checks: {', '.join(failures)}")
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main())
