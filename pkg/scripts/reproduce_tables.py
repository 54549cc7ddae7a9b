"""Regenerate the benchmark tables as markdown files.

Datasets whose raw files are missing from the data directory are skipped with
a message. Reduced grids by default; ``--full-grid`` takes many hours.

    python scripts/reproduce_tables.py --out-dir results
    python scripts/reproduce_tables.py --out-dir results --tables glass synthetic --workers 3
"""
import argparse
import logging
import sys
from pathlib import Path

from lcenclf import bench
from lcenclf.dataprep import DataError

TABLES = ("heart_failure", "bank_marketing", "synthetic", "wine", "glass", "ablation", "mlp")


def _available(name, data_dir):
    try:
        bench.load(name, data_dir)
        return True
    except (OSError, DataError, KeyError) as e:
        print(f"skipping {name}: {e}", file=sys.stderr)
        return False


def heart_failure(kw):
    study = bench.feature_selection_study("heart_failure", bench.LINEAR_MODELS + ("lcen",),
                                          ("all", "named:prior", "lcen"), **kw)
    return bench.render_study(study)


def bank_marketing(kw):
    study = bench.feature_selection_study("bank_marketing", bench.LINEAR_MODELS + ("lcen",),
                                          ("all", "named:prior", "lcen"), **kw)
    return bench.render_study(study)


def synthetic(kw):
    parts = []
    for name in ("synthetic_3b", "synthetic_3i", "synthetic_4b", "synthetic_4i"):
        K = len(bench.dataset_info(name).synthetic_fractions)
        parts.append(f"## {name}\n\n" + bench.render_sweep(bench.min_classes_sweep(name, range(1, K + 1), **kw)))
    return "\n".join(parts)


def wine(kw):
    return bench.render_sweep(bench.min_classes_sweep("wine_quality_red", range(1, 6), **kw))


def glass(kw):
    return bench.render_sweep(bench.min_classes_sweep("glass", range(1, 4), **kw))


def ablation(kw):
    rows = []
    for name in ("heart_failure", "glass", "wine_quality_red"):
        if _available(name, kw.get("data_dir")):
            rows += bench.ablation(name, **kw)
    return bench.render_report(rows, "markdown")


def mlp(kw):
    res = [bench.run_experiment(bench.ExperimentConfig("glass", m, **kw)) for m in ("mlp_ce", "mlp_diffmcc")]
    return bench.render_report(res, "markdown")


NEEDS = {"heart_failure": "heart_failure", "bank_marketing": "bank_marketing", "wine": "wine_quality_red",
         "glass": "glass", "mlp": "glass"}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", type=Path, default=Path("results"))
    ap.add_argument("--tables", nargs="+", choices=TABLES, default=list(TABLES))
    ap.add_argument("--full-grid", action="store_true")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--data-dir")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s: %(message)s")

    args.out_dir.mkdir(parents=True, exist_ok=True)
    kw = dict(full_grid=args.full_grid, workers=args.workers, data_dir=args.data_dir)
    for table in args.tables:
        if table in NEEDS and not _available(NEEDS[table], args.data_dir):
            continue
        text = globals()[table](kw)
        path = args.out_dir / f"{table}.md"
        path.write_text(text, encoding="utf-8")
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
