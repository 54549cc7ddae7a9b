import os
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lcenclf import bench, cli
from lcenclf.bench import (
    ExperimentConfig, ExperimentResult, fmt_mean_std, grids_for, parse_report, render_report, run_experiment,
)
from lcenclf.lcen import ALPHA_GRID, CUTOFF_GRID, CUTOFF_GRID_WIDE, L1_RATIO_GRID

from conftest import DATA_DIR

pytestmark = pytest.mark.skipif(not (DATA_DIR / "glass.data").exists(), reason="glass data missing")

TINY = replace(grids_for("glass"), alphas=(0.003, 0.03), l1_ratios=(0.5,), cutoffs=(0.1, 0.3), degrees=(1,))
TINY_MLP = replace(TINY, templates=(bench.ARCHITECTURE_TEMPLATES[0],), lrs=(0.01,), activations=("relu",),
                   weight_decays=(0.0,), batch_sizes=(32,), epochs=(12,), gammas=(1.0,),
                   class_weights=((1.0, 1.0, 1.0),))


def _cfg(model="lcen", **kw):
    kw.setdefault("seeds", (0, 1))
    kw.setdefault("grids", TINY)
    kw.setdefault("folds", 3)
    kw.setdefault("data_dir", str(DATA_DIR))
    return ExperimentConfig("glass", model, **kw)


def _result(f1, mcc, selected=None):
    n = len(f1)
    return ExperimentResult("glass", "lcen", "LCEN-1", "all", tuple(range(n)), list(f1), list(mcc),
                            selected or [None] * n, [{}] * n, ("a",))


@pytest.fixture(scope="module")
def lcen_glass():
    return run_experiment(_cfg())


# grids ---------------------------------------------------------------------

def test_full_grids_are_complete():
    g = grids_for("glass", full=True)
    assert g.alphas == ALPHA_GRID and len(g.alphas) == 21
    assert g.l1_ratios == L1_RATIO_GRID and len(g.l1_ratios) == 13
    assert g.cutoffs == CUTOFF_GRID_WIDE
    assert len(g.templates) == 63
    assert g.class_weights == ((1.0, 1.0, 1.0), (1.0, 1.0, 2.0))
    assert grids_for("heart_failure", full=True).cutoffs == CUTOFF_GRID
    assert grids_for("wine_quality_red", full=True).class_weights[-1] == (2.0, 1.0, 1.0, 1.0, 2.0)
    assert grids_for("synthetic_3b", full=True).degrees == (1,)


def test_reduced_grids_are_subsets():
    full, red = grids_for("glass", True), grids_for("glass")
    for name in ("alphas", "l1_ratios", "cutoffs", "templates", "lrs", "batch_sizes", "epochs", "gammas"):
        assert set(getattr(red, name)) <= set(getattr(full, name)), name


def test_empty_grid_rejected():
    with pytest.raises(ValueError):
        replace(TINY, alphas=())


def test_mlp_grid_enumerates_product():
    g = grids_for("glass")
    n = (len(g.templates) * len(g.lrs) * len(g.activations) * len(g.weight_decays) * len(g.batch_sizes)
         * len(g.epochs) * len(g.class_weights))
    assert len(bench.mlp_grid(g, "weighted_ce", 9)) == n
    assert len(bench.mlp_grid(g, "diffmcc", 9)) == n * len(g.gammas)


# config ----------------------------------------------------------------------

@pytest.mark.parametrize("kw", [
    dict(model="xgb"), dict(seeds=()), dict(seeds=(1, 1)), dict(folds=1), dict(workers=0),
    dict(feature_set="named:nope"), dict(feature_set="list:"), dict(feature_set="some"),
])
def test_config_validation(kw):
    model = kw.pop("model", "lr")
    with pytest.raises(ValueError):
        ExperimentConfig("glass", model, **kw)


def test_unknown_dataset():
    with pytest.raises(ValueError):
        ExperimentConfig("iris", "lr")


def test_unknown_named_feature_fails_at_run():
    with pytest.raises(ValueError):
        run_experiment(_cfg("lr", feature_set="list:Mg,Zr"))


def test_resolve_features_expands_indicators():
    from lcenclf.dataprep import Dataset
    ds = Dataset("t", np.zeros((2, 3)), [0, 1], ("month=apr", "month=may", "age"), ("n", "y"))
    assert bench.resolve_features(ds, ["age", "month"]) == ("age", "month=apr", "month=may")


def test_unimplemented_baselines_raise():
    with pytest.raises(NotImplementedError):
        run_experiment(_cfg("svm", seeds=(0,)))


# results and reports ---------------------------------------------------------

def test_fmt_rounding():
    assert fmt_mean_std(79.2, 0.04) == "79.2±0.0"
    assert fmt_mean_std(80.66, 2.55) == "80.7±2.5"


def test_std_over_declared_seeds():
    r = _result([70.0, 72.0, 74.0], [40.0, 40.0, 43.0])
    assert r.f1_mean == pytest.approx(72.0)
    assert r.f1_std == pytest.approx(np.std([70, 72, 74]))
    assert r.mcc_std == pytest.approx(np.sqrt(2.0))


def test_most_frequent_selection():
    r = _result([1, 1, 1], [1, 1, 1], [("Mg", "Al"), ("Al", "Mg"), ("Ca",)])
    assert r.most_frequent_selection() == ("Al", "Mg")
    assert r.selection_counts()[0] in (("Mg", 2), ("Al", 2))


def test_single_result_report_shape():
    text = render_report([_result([79.2], [58.5])], "csv")
    lines = text.splitlines()
    assert lines[0] == ",".join(bench.REPORT_COLUMNS)
    assert len(lines) == 2
    md = render_report([_result([79.2], [58.5])], "markdown").splitlines()
    assert len(md) == 3 and md[0].startswith("| Model |")


def test_empty_report_rejected():
    with pytest.raises(ValueError):
        render_report([], "csv")


def test_unwritable_path(tmp_path):
    target = tmp_path / "missing_dir" / "out.csv"
    with pytest.raises(OSError):
        bench.emit_report([_result([1.0], [1.0])], target, "csv")


scores_st = st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=4)


@given(st.data(), st.sampled_from(["csv", "markdown"]))
def test_report_round_trip(data, fmt):
    f1 = data.draw(scores_st)
    mcc = data.draw(st.lists(st.floats(-100, 100), min_size=len(f1), max_size=len(f1)))
    sel = data.draw(st.sampled_from([None, [("Mg|x", "Al")] * len(f1)]))
    r = _result(f1, mcc, sel)
    (row,) = parse_report(render_report([r], fmt), fmt)
    assert row["f1"] == (round(r.f1_mean, 1), round(r.f1_std, 1))
    assert row["mcc"] == (round(r.mcc_mean, 1), round(r.mcc_std, 1))
    assert row["model"] == "LCEN-1" and row["dataset"] == "glass"
    assert row["selected_features"] == bench.report_rows([r])[0]["selected_features"]


def test_report_file_round_trip(tmp_path, lcen_glass):
    for fmt, name in (("csv", "r.csv"), ("markdown", "r.md")):
        p = bench.emit_report([lcen_glass], tmp_path / name, fmt)
        (row,) = parse_report(p)
        assert row["f1"] == (round(lcen_glass.f1_mean, 1), round(lcen_glass.f1_std, 1))


# experiments -------------------------------------------------------------------

def test_run_is_deterministic(lcen_glass):
    again = run_experiment(_cfg())
    assert render_report([again], "csv") == render_report([lcen_glass], "csv")
    assert again.chosen == lcen_glass.chosen


def test_lcen_result_fields(lcen_glass):
    assert lcen_glass.label == "LCEN-1"
    assert len(lcen_glass.f1) == 2 and all(0 <= v <= 100 for v in lcen_glass.f1)
    assert all(-100 <= v <= 100 for v in lcen_glass.mcc)
    assert all(s is not None for s in lcen_glass.selected)
    assert {"degree", "cutoff", "alpha", "l1_ratio", "n_columns"} <= set(lcen_glass.chosen[0])


def test_selecting_all_features_is_a_no_op():
    names = bench.load("glass", DATA_DIR).feature_names
    a = run_experiment(_cfg("en"))
    b = run_experiment(_cfg("en", feature_set="list:" + ",".join(names)))
    assert (a.f1, a.mcc, a.chosen) == (b.f1, b.mcc, b.chosen)


def test_worker_count_invariance(lcen_glass):
    par = run_experiment(_cfg(workers=2))
    assert (par.f1, par.mcc, par.selected, par.chosen) == (lcen_glass.f1, lcen_glass.mcc, lcen_glass.selected,
                                                            lcen_glass.chosen)


def test_sweep_single_value_matches_plain_run(lcen_glass):
    sw = bench.min_classes_sweep("glass", [1], seeds=(0, 1), grids=TINY, folds=3, data_dir=str(DATA_DIR))
    assert sw.tukey_f1 is None
    assert render_report(sw.results, "csv") == render_report([lcen_glass], "csv")


def test_sweep_rejects_out_of_range():
    with pytest.raises(ValueError):
        bench.min_classes_sweep("glass", [4], grids=TINY, data_dir=str(DATA_DIR))


def test_sweep_runs_tukey():
    sw = bench.min_classes_sweep("glass", [1, 3], seeds=(0, 1), grids=TINY, folds=3, data_dir=str(DATA_DIR))
    assert [r.label for r in sw.results] == ["LCEN-1", "LCEN-3"]
    assert sw.tukey_mcc.pvalues.shape == (2, 2)
    assert "Tukey HSD (MCC)" in bench.render_sweep(sw)


def test_feature_selection_study():
    study = bench.feature_selection_study("glass", ["lr", "lasso"], ("all", "named:lcen"),
                                          seeds=(0, 1), grids=TINY, folds=3, data_dir=str(DATA_DIR))
    assert [r.feature_set for r in study.results["named:lcen"]] == ["named:lcen"] * 2
    assert study.results["named:lcen"][0].features == ("Mg", "Al", "K", "Ca")
    assert ("all", "named:lcen", "mcc") in study.tests
    assert "paired t (mcc)" in bench.render_study(study)


def test_lcen_feature_set_uses_majority_selection(lcen_glass):
    res = run_experiment(_cfg("lr", feature_set="lcen"))
    need = 2
    assert set(res.features) == {f for f, n in lcen_glass.selection_counts() if n >= need}


def test_output_path_written(tmp_path):
    out = tmp_path / "lr.csv"
    run_experiment(_cfg("lr", seeds=(0,), output_path=str(out)))
    (row,) = parse_report(out)
    assert row["model"] == "LR"


def test_mlp_smoke():
    res = run_experiment(_cfg("mlp_diffmcc", seeds=(0,), grids=TINY_MLP))
    assert res.label == "MLP-diffMCC"
    assert res.chosen[0]["hidden_sizes"] and res.chosen[0]["gamma"] == 1.0
    assert run_experiment(_cfg("mlp_diffmcc", seeds=(0,), grids=TINY_MLP)).mcc == res.mcc


# cli -------------------------------------------------------------------------

def test_cli_run_writes_csv(tmp_path, capsys):
    out = tmp_path / "lr.csv"
    code = cli.main(["run", "--dataset", "glass", "--model", "lr", "--seeds", "0", "--folds", "3",
                     "--data-dir", str(DATA_DIR), "--out", str(out)])
    assert code == 0
    (row,) = parse_report(out)
    assert row["model"] == "LR" and row["features"] == "all"


def test_cli_markdown_to_stdout(capsys):
    code = cli.main(["run", "--dataset", "glass", "--model", "lr", "--seeds", "0", "--data-dir", str(DATA_DIR),
                     "--features", "named:lcen"])
    assert code == 0
    assert capsys.readouterr().out.startswith("| Model |")


def test_cli_config_file(tmp_path):
    ini = tmp_path / "run.ini"
    out = tmp_path / "r.md"
    ini.write_text(f"[run]\ndataset = glass\nmodel = lr\nseeds = 0\ndata_dir = {DATA_DIR}\nout = {out}\n")
    assert cli.main(["run", "--config", str(ini)]) == 0
    assert parse_report(out)[0]["model"] == "LR"


@pytest.mark.parametrize("argv", [
    ["run", "--dataset", "iris", "--model", "lr"],
    ["run", "--dataset", "glass"],
    ["run", "--model", "lr"],
    ["run", "--dataset", "glass", "--model", "svm", "--seeds", "0"],
    ["sweep-min-classes", "--dataset", "glass", "--values", "0"],
])
def test_cli_errors_exit_nonzero(argv, capsys):
    assert cli.main(argv + ["--data-dir", str(DATA_DIR)]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_bad_config_key(tmp_path):
    ini = tmp_path / "bad.ini"
    ini.write_text("[run]\ndataset = glass\ncolour = red\n")
    assert cli.main(["run", "--config", str(ini), "--model", "lr"]) == 2


def test_cli_unwritable_out(tmp_path):
    out = tmp_path / "nope" / "x.csv"
    assert cli.main(["run", "--dataset", "glass", "--model", "lr", "--seeds", "0",
                     "--data-dir", str(DATA_DIR), "--out", str(out)]) == 2


def test_cli_usage_error_exits_2():
    with pytest.raises(SystemExit) as e:
        cli.main(["run", "--seeds", "a,b"])
    assert e.value.code == 2


@pytest.mark.skipif(os.environ.get("CI_NO_SUBPROCESS") == "1", reason="subprocess disabled")
def test_console_script_help():
    import subprocess
    import sys
    out = subprocess.run([sys.executable, "-m", "lcenclf.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "sweep-min-classes" in out.stdout
