"""Command-line entry point: ``lcenclf run | sweep-min-classes | ablate``.

Any flag may instead come from an INI file given with ``--config``; keys live
in a section named after the subcommand (``[run]``, ``[sweep-min-classes]``,
``[ablate]``) and use the long flag names without dashes, e.g.::

    [run]
    dataset = glass
    model = lcen
    seeds = 0,1,2
    full_grid = false
    out = glass_lcen.md

Flags given on the command line override the file.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import sys
from pathlib import Path

from . import bench


def _int_list(s: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(v) for v in str(s).split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {s!r}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI file supplying defaults for this subcommand")
    p.add_argument("--dataset", help=f"one of {', '.join(sorted(bench.DATASETS))}")
    p.add_argument("--seeds", type=_int_list, default=bench.DEFAULT_SEEDS, help="comma-separated (default 0,1,2)")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--full-grid", action="store_true", help="use the complete grids (slow)")
    p.add_argument("--selection-metric", choices=("f1", "mcc"), default="f1")
    p.add_argument("--data-dir", help="directory with manifest.json and the raw files")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, help="write the table here instead of stdout")
    p.add_argument("--format", choices=("csv", "markdown"), default=None,
                   help="default: from --out suffix, markdown on stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lcenclf", description="LCEN classification experiments")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="one model on one dataset")
    _common(run)
    run.add_argument("--model", help=f"one of {', '.join(sorted(bench.MODELS))}")
    run.add_argument("--features", default="all", help="all | lcen | list:<a,b,...> | named:<key>")
    run.add_argument("--min-classes", type=int, default=1)

    sw = sub.add_parser("sweep-min-classes", help="LCEN-k for several k")
    _common(sw)
    sw.add_argument("--values", type=_int_list, default=None)

    ab = sub.add_parser("ablate", help="LC, ENC, LEN, LCL, ENCEN and LCEN")
    _common(ab)
    ab.add_argument("--min-classes", type=int, default=1)
    return ap


def _apply_config(ap: argparse.ArgumentParser, args: argparse.Namespace, argv: list[str]) -> None:
    if not args.config:
        return
    cp = configparser.ConfigParser()
    if not cp.read(args.config):
        raise FileNotFoundError(f"config file {args.config} not found")
    if not cp.has_section(args.command):
        raise ValueError(f"{args.command}: config file has no [{args.command}] section")
    given = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
    conv = {"seeds": _int_list, "values": _int_list, "folds": int, "workers": int, "min_classes": int,
            "full_grid": _bool, "out": Path}
    for key, raw in cp.items(args.command):
        k = key.replace("-", "_")
        if not hasattr(args, k) or k == "config":
            raise ValueError(f"unknown key {key!r} in [{args.command}]")
        if k not in given:
            setattr(args, k, conv.get(k, str)(raw))


def _cfg_kwargs(args) -> dict:
    return dict(seeds=args.seeds, folds=args.folds, full_grid=args.full_grid,
                selection_metric=args.selection_metric, data_dir=args.data_dir, workers=args.workers)


def _emit(text: str, args) -> None:
    if args.out:
        args.out.write_text(text, encoding="utf-8")
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)


def _fmt(args) -> str:
    if args.format:
        return args.format
    return "csv" if args.out and args.out.suffix == ".csv" else "markdown"


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _apply_config(ap, args, argv)
        if not args.dataset:
            raise ValueError("--dataset is required")
        if args.command == "run":
            if not args.model:
                raise ValueError("--model is required")
            cfg = bench.ExperimentConfig(args.dataset, args.model, args.features,
                                         min_classes_selected=args.min_classes, **_cfg_kwargs(args))
            _emit(bench.render_report([bench.run_experiment(cfg)], _fmt(args)), args)
        elif args.command == "sweep-min-classes":
            values = args.values or tuple(range(1, bench.load(args.dataset, args.data_dir).n_classes + 1))
            sweep = bench.min_classes_sweep(args.dataset, values, **_cfg_kwargs(args))
            text = bench.render_sweep(sweep) if _fmt(args) == "markdown" else bench.render_report(sweep.results, "csv")
            _emit(text, args)
        else:
            res = bench.ablation(args.dataset, min_classes_selected=args.min_classes, **_cfg_kwargs(args))
            _emit(bench.render_report(res, _fmt(args)), args)
    except (ValueError, OSError, RuntimeError, NotImplementedError) as e:
        print(f"lcenclf {args.command}: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
