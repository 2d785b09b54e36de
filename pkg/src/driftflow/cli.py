"""``driftflow`` command line: train, sample, eval, verify.

Exit codes: 0 ok, 1 config or argument error, 2 divergence, 3 I/O or corrupt
checkpoint, 4 verification failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import verify
from .evalkit import MetricError, emd_to_target
from .netcore import CheckpointError, DivergenceError, load_checkpoint, save_checkpoint
from .runconfig import ConfigError, config_hash, load_config
from .sampler import TimeGrid, generate
from .svgplot import scatter_svg
from .synthdata import DatasetSpec, PointBatch, SourceSpec, read_csv, sample_source, sample_target, write_csv
from .trainer import train

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO, EXIT_VERIFY = 0, 1, 2, 3, 4
CHECKPOINT_NAME = "model.ckpt"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _fail(code, message):
    print(f"error: {message}", file=sys.stderr)
    return code


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_train(args):
    try:
        cfg, digest = load_config(args.config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    out = Path(args.out or cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot create output directory {out}: {exc.strerror}")
    try:
        report = train(cfg.train, cfg.source, cfg.dataset)
    except DivergenceError as exc:
        return _fail(EXIT_DIVERGED, f"training diverged at {exc}")
    except ValueError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    try:
        save_checkpoint(out / CHECKPOINT_NAME, report.net, step=cfg.train.steps, method=cfg.train.method,
                        source=asdict(cfg.source), dataset=asdict(cfg.dataset), config_hash=digest)
        report.to_csv(out / "train_report.csv")
        summary = report.summary()
        summary.update(config_hash=digest, config=cfg.to_dict())
        _write_json(out / "train_report.json", summary)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write artifacts to {out}: {exc.strerror}")
    print(f"trained {cfg.train.method} for {cfg.train.steps} steps; artifacts in {out}")
    return EXIT_OK


def _sample_labels(n, n_classes):
    return np.arange(n) % n_classes if n_classes else None


def cmd_sample(args):
    if args.nfe < 1 or args.n < 1:
        return _fail(EXIT_CONFIG, "--nfe and --n must be >= 1")
    try:
        net, header = load_checkpoint(args.checkpoint)
        source = SourceSpec(**header.get("source", {}))
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read checkpoint {args.checkpoint}: {exc.strerror}")
    except (CheckpointError, TypeError, ValueError) as exc:
        return _fail(EXIT_IO, f"corrupt checkpoint: {exc}")
    x0 = sample_source(source, args.n, args.seed).data
    labels = _sample_labels(args.n, net.n_classes)
    grid = TimeGrid.uniform(args.nfe)
    instantaneous = header.get("method") == "flow_matching"
    try:
        result, states = generate(net, x0, grid, record_trajectory=True, labels=labels,
                                  instantaneous=instantaneous)
    except DivergenceError as exc:
        return _fail(EXIT_DIVERGED, str(exc))
    try:
        write_csv(args.out, result.data, labels)
        if args.trajectory:
            tdir = Path(args.trajectory)
            tdir.mkdir(parents=True, exist_ok=True)
            files = []
            for m, state in enumerate(states):
                name = f"step_{m:03d}.csv"
                write_csv(tdir / name, state, labels)
                files.append(name)
            _write_json(tdir / "manifest.json", {"grid": [float(t) for t in grid.points], "files": files,
                                                  "nfe": grid.nfe, "seed": args.seed})
        if args.svg:
            scatter_svg([(x0, "blue"), (result.data, "red")], args.svg, title=f"NFE = {args.nfe}")
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write output: {exc.strerror}")
    print(f"wrote {args.n} samples to {args.out}")
    return EXIT_OK


def cmd_eval(args):
    try:
        gen = PointBatch(*read_csv(args.generated))
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read {args.generated}: {exc.strerror}")
    except ValueError as exc:
        return _fail(EXIT_IO, str(exc))
    digest = None
    if args.config:
        try:
            digest = config_hash(Path(args.config).read_bytes())
        except OSError as exc:
            return _fail(EXIT_CONFIG, f"cannot read config {args.config}: {exc.strerror}")
    if args.reference:
        try:
            ref = PointBatch(*read_csv(args.reference))
        except OSError as exc:
            return _fail(EXIT_IO, f"cannot read {args.reference}: {exc.strerror}")
        except ValueError as exc:
            return _fail(EXIT_IO, str(exc))
    else:
        try:
            spec = DatasetSpec(args.dataset, class_count=args.class_count)
        except ValueError as exc:
            return _fail(EXIT_CONFIG, str(exc))
        n_ref = args.n_reference or len(gen)
        labels = None
        if spec.class_count and gen.labels is not None:
            labels = _sample_labels(n_ref, spec.class_count)
        ref = sample_target(spec, n_ref, args.seed, labels)
    try:
        value = emd_to_target(gen, ref, seed=args.seed, subsample=args.subsample)
    except (MetricError, ValueError) as exc:
        return _fail(EXIT_CONFIG, str(exc))
    report = {"metric": "emd_w2_squared", "value": value, "n": min(len(gen), len(ref)), "seed": args.seed,
              "config_hash": digest}
    print(json.dumps(report, sort_keys=True))
    if args.out:
        try:
            _write_json(args.out, report)
        except OSError as exc:
            return _fail(EXIT_IO, f"cannot write {args.out}: {exc.strerror}")
    return EXIT_OK


def cmd_verify(args):
    result = verify.run_suite(args.suite, args.seed)
    print("\n".join(result.lines()))
    return EXIT_OK if result.passed else EXIT_VERIFY


def build_parser():
    p = _Parser(prog="driftflow", description="Drift flow matching on 2-D point clouds.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a model from a JSON run config")
    t.add_argument("config")
    t.add_argument("--out", help="output directory (overrides output_dir in the config)")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sample", help="generate points from a checkpoint")
    s.add_argument("checkpoint")
    s.add_argument("--nfe", type=int, default=1)
    s.add_argument("--n", type=int, default=512)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="CSV path for the generated points")
    s.add_argument("--trajectory", metavar="DIR", help="also write every intermediate state")
    s.add_argument("--svg", metavar="PATH", help="scatter plot of source (blue) and output (red)")
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("eval", help="EMD between generated points and a reference")
    e.add_argument("generated")
    ref = e.add_mutually_exclusive_group(required=True)
    ref.add_argument("--reference", help="reference CSV")
    ref.add_argument("--dataset", help="draw the reference from a named dataset")
    e.add_argument("--class-count", type=int, default=0)
    e.add_argument("--n-reference", type=int)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--subsample", action="store_true", help="subsample the larger set instead of failing")
    e.add_argument("--config", help="run config whose hash goes into the report")
    e.add_argument("--out", help="JSON report path")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="run a randomized property suite")
    v.add_argument("suite", choices=verify.SUITES)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)
    return p


def thread_count():
    raw = os.environ.get("DRIFTFLOW_THREADS", "1")
    n = int(raw)
    if n < 1:
        raise ValueError
    return n


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        threads = thread_count()
    except ValueError:
        return _fail(EXIT_CONFIG, f"DRIFTFLOW_THREADS must be a positive integer, got {os.environ['DRIFTFLOW_THREADS']!r}")
    with threadpool_limits(threads):
        return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
