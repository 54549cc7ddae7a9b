"""Experiment harness: dataset registry, grids, the train/CV/test protocol and tables.

Every run is a pure function of its :class:`ExperimentConfig`. Seeds drive the
CV folds, the MLP validation holdout and MLP initialization; the train/test
split itself is fixed per dataset (see ``DATASETS``) so seed variation reflects
the modelling procedure, not the split.
"""
from __future__ import annotations

import csv
import io
import logging
import os
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dataprep import Dataset, SplitPolicy, load_from_dir, make_synthetic, split, split_indices, standardize
from .lcen import (ALPHA_GRID, CUTOFF_GRID, CUTOFF_GRID_WIDE, L1_RATIO_GRID, VARIANTS, LcenConfig,
                   fit_lcen, fit_penalized_cv, selected_raw_features)
from .metrics import PairedT, TukeyResult, paired_t_test, scores, tukey_hsd
from .mlp import ARCHITECTURE_TEMPLATES, GAMMAS, MlpSpec, architectures, param_count, predict, train

log = logging.getLogger(__name__)

DEFAULT_DATA_DIR = Path(os.environ.get("LCENCLF_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))
DEFAULT_SEEDS = (0, 1, 2)


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class DatasetInfo:
    name: str
    split: SplitPolicy
    cutoffs: tuple[float, ...]
    class_weights: tuple[tuple[float, ...], ...]
    feature_lists: dict = field(default_factory=dict)
    degrees: tuple[int, ...] = (1, 2, 3)
    synthetic_fractions: tuple[float, ...] | None = None


SYNTHETIC_N, SYNTHETIC_D, SYNTHETIC_INFORMATIVE, SYNTHETIC_DATA_SEED = 750, 300, 200, 0

# Raw features after one-hot encoding. The bank list is the prior-work set of
# macro-economic and contact columns; "month" and "contact" expand to their
# indicator columns when resolved (18 columns in total).
_BANK_PRIOR = ("emp.var.rate", "euribor3m", "cons.price.idx", "nr.employed", "cons.conf.idx",
               "month", "contact", "campaign")


def _synthetic(fr):
    return DatasetInfo(
        name="", split=SplitPolicy("stratified_fraction", 0.2, seed=0), cutoffs=CUTOFF_GRID,
        class_weights=((1.0,) * len(fr),), degrees=(1,), synthetic_fractions=fr,
    )


DATASETS: dict[str, DatasetInfo] = {
    "heart_failure": DatasetInfo(
        "heart_failure", SplitPolicy("random_fraction", 0.2, seed=0), CUTOFF_GRID,
        ((1.0, 1.0), (1.0, 2.0)),
        {"prior": ("serum_creatinine", "ejection_fraction"),
         "lcen": ("ejection_fraction", "age", "serum_creatinine")},
    ),
    "bank_marketing": DatasetInfo(
        "bank_marketing", SplitPolicy("last_n_rows", 2058), CUTOFF_GRID,
        ((1.0, 1.0), (1.0, 2.0)),
        {"prior": _BANK_PRIOR},
    ),
    "wine_quality_red": DatasetInfo(
        "wine_quality_red", SplitPolicy("random_fraction", 0.2, seed=0), CUTOFF_GRID,
        ((1.0, 1.0, 1.0, 1.0, 1.0), (1.0, 1.0, 1.0, 1.0, 2.0), (2.0, 1.0, 1.0, 1.0, 2.0)),
        {"prior": ("alcohol", "sulphates", "volatile acidity", "total sulfur dioxide", "citric acid",
                    "chlorides", "free sulfur dioxide"),
         "lcen": ("fixed acidity", "citric acid", "chlorides", "free sulfur dioxide",
                  "total sulfur dioxide", "sulphates", "alcohol")},
    ),
    "glass": DatasetInfo(
        "glass", SplitPolicy("stratified_fraction", 0.2, seed=0), CUTOFF_GRID_WIDE,
        ((1.0, 1.0, 1.0), (1.0, 1.0, 2.0)),
        {"class_correlation": ("Mg", "Al", "Ba", "Na"), "lcen": ("Mg", "Al", "K", "Ca")},
    ),
    "synthetic_3b": _synthetic((0.4, 0.3, 0.3)),
    "synthetic_3i": _synthetic((0.45, 0.45, 0.1)),
    "synthetic_4b": _synthetic((0.25, 0.25, 0.25, 0.25)),
    "synthetic_4i": _synthetic((0.4, 0.4, 0.1, 0.1)),
}
for _k, _v in list(DATASETS.items()):
    if not _v.name:
        DATASETS[_k] = replace(_v, name=_k)


def dataset_info(name: str) -> DatasetInfo:
    try:
        return DATASETS[name]
    except KeyError:
        raise ValueError(f"unknown dataset {name!r}; choose from {sorted(DATASETS)}") from None


def load(name: str, data_dir: str | Path | None = None) -> Dataset:
    info = dataset_info(name)
    if info.synthetic_fractions is not None:
        ds = make_synthetic(SYNTHETIC_N, SYNTHETIC_D, SYNTHETIC_INFORMATIVE, info.synthetic_fractions,
                            SYNTHETIC_DATA_SEED)
        return replace(ds, name=name)
    return load_from_dir(name, data_dir if data_dir is not None else DEFAULT_DATA_DIR)


def resolve_features(ds: Dataset, names: Sequence[str]) -> tuple[str, ...]:
    """Map raw names to dataset columns; a categorical name picks up all its indicators."""
    out: list[str] = []
    for n in names:
        if n in ds.feature_names:
            hits = [n]
        else:
            hits = [f for f in ds.feature_names if f.startswith(n + "=") or f.startswith(n + "_")]
        if not hits:
            raise ValueError(f"{ds.name}: unknown feature {n!r}")
        out += [h for h in hits if h not in out]
    return tuple(out)


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class Grids:
    alphas: tuple[float, ...]
    l1_ratios: tuple[float, ...]
    cutoffs: tuple[float, ...]
    degrees: tuple[int, ...]
    templates: tuple[tuple[float, ...], ...]
    lrs: tuple[float, ...]
    activations: tuple[str, ...]
    weight_decays: tuple[float, ...]
    batch_sizes: tuple[int, ...]
    epochs: tuple[int, ...]
    gammas: tuple[float, ...]
    class_weights: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not v:
                raise ValueError(f"grid {k!r} is empty")


FULL_MLP = dict(
    templates=ARCHITECTURE_TEMPLATES, lrs=(0.0005, 0.001, 0.005, 0.01, 0.05), activations=("relu", "tanhshrink"),
    weight_decays=(0.0, 0.01), batch_sizes=(32, 128, 512, 2048), epochs=(50, 100), gammas=GAMMAS,
)
REDUCED_ALPHAS = (0.0,) + ALPHA_GRID[1::3]
REDUCED_L1_RATIOS = (0.0, 0.5, 0.9, 0.99)
REDUCED_MLP = dict(
    templates=ARCHITECTURE_TEMPLATES[::7], lrs=(0.001, 0.005, 0.01), activations=("relu", "tanhshrink"),
    weight_decays=(0.0, 0.01), batch_sizes=(32,), epochs=(100,), gammas=GAMMAS,
)


def _reduced_cutoffs(cutoffs):
    return tuple(c for c in cutoffs if c in (0.01, 0.03, 0.1, 0.3, 0.6))


def grids_for(dataset: str, full: bool = False) -> Grids:
    """Hyperparameter grids; ``full`` enumerates the complete published menus."""
    info = dataset_info(dataset)
    if full:
        return Grids(ALPHA_GRID, L1_RATIO_GRID, info.cutoffs, info.degrees,
                     class_weights=info.class_weights, **FULL_MLP)
    return Grids(REDUCED_ALPHAS, REDUCED_L1_RATIOS, _reduced_cutoffs(info.cutoffs), info.degrees,
                 class_weights=info.class_weights, **REDUCED_MLP)


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class SeedOutcome:
    f1: float
    mcc: float
    selected: tuple[str, ...] | None
    chosen: dict
    seconds: float


def _lcen_variant(model: str) -> str | None:
    up = model.upper()
    return up if up in VARIANTS else None


def _run_linear(model, train_ds, test_ds, seed, grids, cfg):
    l1 = {"lr": (0.0,), "lasso": (1.0,), "rr": (0.0,), "en": grids.l1_ratios}[model]
    alphas = (0.0,) if model == "lr" else tuple(a for a in grids.alphas if a > 0)
    m = fit_penalized_cv(train_ds, l1, alphas, cv_folds=cfg.folds, seed=seed,
                         selection_metric=cfg.selection_metric)
    return m.predict(test_ds.X), None, dict(m.chosen)


def _run_lcen(model, train_ds, test_ds, seed, grids, cfg):
    lc = LcenConfig(degrees=grids.degrees, cutoffs=grids.cutoffs, alphas=grids.alphas,
                    l1_ratios=grids.l1_ratios, min_classes_selected=cfg.min_classes_selected,
                    variant=_lcen_variant(model), cv_folds=cfg.folds, seed=seed,
                    selection_metric=cfg.selection_metric)
    m = fit_lcen(train_ds, lc)
    sel = tuple(selected_raw_features(m, feature_names=train_ds.feature_names))
    chosen = dict(m.chosen, n_columns=int(len(m.selected_columns)))
    if m.no_features_selected:
        chosen["note"] = "no features selected"
    return m.predict(test_ds.X), sel, chosen


def mlp_grid(grids: Grids, loss: str, n_features: int) -> list[MlpSpec]:
    """Every MLP configuration in the grid (seed left at 0)."""
    specs = []
    gammas = grids.gammas if loss == "diffmcc" else (1.0,)
    for t in grids.templates:
        (hidden,) = architectures(n_features, (t,))
        for lr in grids.lrs:
            for act in grids.activations:
                for wd in grids.weight_decays:
                    for bs in grids.batch_sizes:
                        for ep in grids.epochs:
                            for cw in grids.class_weights:
                                for g in gammas:
                                    specs.append(MlpSpec(hidden, act, lr, wd, bs, ep, class_weights=cw,
                                                         loss=loss, gamma=g))
    return specs


def _run_mlp(model, train_ds, test_ds, seed, grids, cfg):
    loss = "diffmcc" if model == "mlp_diffmcc" else "weighted_ce"
    inner_idx, val_idx = split_indices(train_ds.y, SplitPolicy("stratified_fraction", 0.2, seed=seed))
    inner, val = train_ds.subset(inner_idx), train_ds.subset(val_idx)
    Xi, rest, _, _ = standardize(inner.X, np.vstack([val.X, test_ds.X]), allow_constant=True)
    Xv, Xt = rest[: len(val_idx)], rest[len(val_idx):]
    inner, val = replace(inner, X=Xi), replace(val, X=Xv)
    K = train_ds.n_classes
    best = None
    for i, spec in enumerate(mlp_grid(grids, loss, train_ds.n_features)):
        spec = replace(spec, seed=seed)
        try:
            net = train(spec, inner, val)
        except FloatingPointError as e:
            log.warning("mlp cell %d failed: %s", i, e)
            continue
        f1, mcc = scores(val.y, predict(net, val.X), K)
        # smaller networks win exact ties, then grid order
        key = (round(f1, 9), round(mcc, 9), -net.param_count, -i)
        if best is None or key > best[0]:
            best = (key, net, spec)
    if best is None:
        raise RuntimeError("every MLP grid cell failed")
    _, net, spec = best
    chosen = {"hidden_sizes": list(spec.hidden_sizes), "activation": spec.activation, "lr": spec.lr,
              "weight_decay": spec.weight_decay, "batch_size": spec.batch_size, "epochs": spec.epochs,
              "class_weights": list(spec.class_weights), "gamma": spec.gamma, "best_epoch": net.best_epoch,
              "param_count": net.param_count}
    if loss != "diffmcc":
        chosen.pop("gamma")
    return predict(net, Xt), None, chosen


def _not_implemented(model, *a):
    raise NotImplementedError(f"{model} is a registry slot only; it is not implemented in this package")


MODELS: dict[str, Callable] = {
    "lr": _run_linear, "lasso": _run_linear, "rr": _run_linear, "en": _run_linear,
    **{v.lower(): _run_lcen for v in VARIANTS},
    "mlp_ce": _run_mlp, "mlp_diffmcc": _run_mlp,
    "svm": _not_implemented, "rf": _not_implemented, "gbdt": _not_implemented, "adab": _not_implemented,
}
LINEAR_MODELS = ("lr", "lasso", "rr", "en")
ABLATION_MODELS = ("lc", "enc", "len", "lcl", "encen", "lcen")


def model_label(model: str, min_classes: int = 1, n_classes: int = 2) -> str:
    if _lcen_variant(model):
        v = _lcen_variant(model)
        return f"{v}-{min_classes}" if n_classes > 2 else v
    return {"mlp_ce": "MLP-CE", "mlp_diffmcc": "MLP-diffMCC"}.get(model, model.upper())


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class ExperimentConfig:
    """One (dataset, model, feature set) cell of a results table.

    ``feature_set`` is ``"all"``, ``"lcen"`` (features LCEN selects on the
    same seeds), ``"named:<key>"`` for a list registered with the dataset, or
    ``"list:a,b,c"``.
    """
    dataset: str
    model: str
    feature_set: str = "all"
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    folds: int = 5
    full_grid: bool = False
    grids: Grids | None = None          # overrides full_grid when given
    min_classes_selected: int = 1
    selection_metric: str = "f1"
    data_dir: str | None = None
    workers: int = 1
    output_path: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        dataset_info(self.dataset)
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; choose from {sorted(MODELS)}")
        if not self.seeds:
            raise ValueError("seed list is empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("duplicate seeds")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.min_classes_selected < 1:
            raise ValueError("min_classes_selected must be >= 1")
        if self.selection_metric not in ("f1", "mcc"):
            raise ValueError("selection_metric must be 'f1' or 'mcc'")
        fs = self.feature_set
        if not (fs in ("all", "lcen") or fs.startswith("named:") or fs.startswith("list:")):
            raise ValueError(f"bad feature_set {fs!r}")
        if fs.startswith("named:") and fs[6:] not in dataset_info(self.dataset).feature_lists:
            raise ValueError(f"{self.dataset} has no feature list {fs[6:]!r}")
        if fs.startswith("list:") and not [n for n in fs[5:].split(",") if n.strip()]:
            raise ValueError("empty feature list")

    def resolved_grids(self) -> Grids:
        return self.grids if self.grids is not None else grids_for(self.dataset, self.full_grid)


@dataclass
class ExperimentResult:
    dataset: str
    model: str
    label: str
    feature_set: str
    seeds: tuple[int, ...]
    f1: list[float]
    mcc: list[float]
    selected: list[tuple[str, ...] | None]
    chosen: list[dict]
    features: tuple[str, ...]
    wall_seconds: float = 0.0

    @property
    def f1_mean(self) -> float:
        return float(np.mean(self.f1))

    @property
    def f1_std(self) -> float:
        return float(np.std(self.f1))

    @property
    def mcc_mean(self) -> float:
        return float(np.mean(self.mcc))

    @property
    def mcc_std(self) -> float:
        return float(np.std(self.mcc))

    def selection_counts(self) -> list[tuple[str, int]]:
        """Raw features by how many seeds selected them, most frequent first."""
        c = Counter(f for s in self.selected if s for f in s)
        first = {}
        for s in self.selected:
            for i, f in enumerate(s or ()):
                first.setdefault(f, (len(first), i))
        return sorted(c.items(), key=lambda kv: (-kv[1], first[kv[0]]))

    def most_frequent_selection(self) -> tuple[str, ...] | None:
        sets = [frozenset(s) for s in self.selected if s is not None]
        if not sets:
            return None
        counts = Counter(sets)
        top = max(counts.values())
        winner = next(s for s in sets if counts[s] == top)   # earliest seed among ties
        return tuple(sorted(winner))


def _run_seed(args) -> SeedOutcome:
    cfg, train_ds, test_ds, seed = args
    t = time.perf_counter()
    y_pred, sel, chosen = MODELS[cfg.model](cfg.model, train_ds, test_ds, seed, cfg.resolved_grids(), cfg)
    f1, mcc = scores(test_ds.y, y_pred, train_ds.n_classes)
    return SeedOutcome(f1, mcc, sel, chosen, time.perf_counter() - t)


def _map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))   # map keeps input order


def _feature_names(cfg: ExperimentConfig, ds: Dataset) -> tuple[str, ...]:
    fs = cfg.feature_set
    if fs == "all":
        return ds.feature_names
    if fs.startswith("named:"):
        return resolve_features(ds, dataset_info(cfg.dataset).feature_lists[fs[6:]])
    if fs.startswith("list:"):
        return resolve_features(ds, [n.strip() for n in fs[5:].split(",") if n.strip()])
    return lcen_selected_features(cfg)


def lcen_selected_features(cfg: ExperimentConfig) -> tuple[str, ...]:
    """Raw features LCEN picks in a majority of seeds (all features, same grid)."""
    sel_cfg = replace(cfg, model="lcen", feature_set="all", output_path=None)
    res = run_experiment(sel_cfg)
    need = len(res.seeds) // 2 + 1
    feats = tuple(f for f, n in res.selection_counts() if n >= need)
    if not feats:
        raise RuntimeError(f"{cfg.dataset}: LCEN selected no feature in a majority of seeds")
    return feats


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    t0 = time.perf_counter()
    info = dataset_info(cfg.dataset)
    ds = load(cfg.dataset, cfg.data_dir)
    feats = _feature_names(cfg, ds)
    if feats != ds.feature_names:
        ds = ds.select_features(feats)
    train_ds, test_ds = split(ds, info.split)
    outcomes = _map(_run_seed, [(cfg, train_ds, test_ds, s) for s in cfg.seeds], cfg.workers)
    res = ExperimentResult(
        dataset=cfg.dataset, model=cfg.model,
        label=model_label(cfg.model, cfg.min_classes_selected, ds.n_classes),
        feature_set=cfg.feature_set, seeds=cfg.seeds,
        f1=[o.f1 for o in outcomes], mcc=[o.mcc for o in outcomes],
        selected=[o.selected for o in outcomes], chosen=[o.chosen for o in outcomes],
        features=tuple(feats), wall_seconds=time.perf_counter() - t0,
    )
    log.info("%s %s [%s]: F1 %s MCC %s", cfg.dataset, res.label, cfg.feature_set,
             fmt_mean_std(res.f1_mean, res.f1_std), fmt_mean_std(res.mcc_mean, res.mcc_std))
    if cfg.output_path:
        emit_report([res], cfg.output_path, _format_from_path(cfg.output_path))
    return res


# ---------------------------------------------------------------------------
# studies


@dataclass
class StudyTable:
    dataset: str
    feature_sets: tuple[str, ...]
    results: dict[str, list[ExperimentResult]]      # feature set -> one result per model
    tests: dict[tuple[str, str, str], PairedT]       # (set a, set b, metric) -> paired t


def feature_selection_study(dataset: str, models: Sequence[str], feature_sets: Sequence[str] = ("all", "lcen"),
                            *, pairing: str = "model_seed", **cfg_kwargs) -> StudyTable:
    """Retrain every model on each feature set and compare the sets with paired t-tests.

    ``pairing="model_seed"`` pairs every (model, seed) score across the two
    sets; ``"model_mean"`` pairs the per-model seed means.
    """
    if pairing not in ("model_seed", "model_mean"):
        raise ValueError("pairing must be 'model_seed' or 'model_mean'")
    results = {}
    for fs in feature_sets:
        if fs == "lcen":
            feats = lcen_selected_features(ExperimentConfig(dataset, "lcen", **cfg_kwargs))
            fs_run = "list:" + ",".join(feats)
        else:
            fs_run = fs
        results[fs] = [replace(run_experiment(ExperimentConfig(dataset, m, fs_run, **cfg_kwargs)), feature_set=fs)
                       for m in models]

    def sample(rs, metric):
        if pairing == "model_mean":
            return [float(np.mean(getattr(r, metric))) for r in rs]
        return [v for r in rs for v in getattr(r, metric)]

    tests = {}
    sets = list(feature_sets)
    for i, a in enumerate(sets):
        for b in sets[i + 1:]:
            for metric in ("f1", "mcc"):
                sa, sb = sample(results[a], metric), sample(results[b], metric)
                if len(sa) >= 2:
                    tests[(a, b, metric)] = paired_t_test(sa, sb)
    return StudyTable(dataset, tuple(sets), results, tests)


@dataclass
class SweepTable:
    dataset: str
    values: tuple[int, ...]
    results: list[ExperimentResult]
    tukey_f1: TukeyResult | None
    tukey_mcc: TukeyResult | None


def min_classes_sweep(dataset: str, values: Sequence[int], model: str = "lcen", **cfg_kwargs) -> SweepTable:
    K = load(dataset, cfg_kwargs.get("data_dir")).n_classes
    values = tuple(int(v) for v in values)
    if not values or any(not 1 <= v <= K for v in values):
        raise ValueError(f"min-classes values must lie in [1, {K}], got {values}")
    results = [run_experiment(ExperimentConfig(dataset, model, min_classes_selected=v, **cfg_kwargs))
               for v in values]
    tf = tm = None
    if len(values) >= 2 and all(len(r.seeds) >= 2 for r in results):
        tf = tukey_hsd([r.f1 for r in results])
        tm = tukey_hsd([r.mcc for r in results])
    return SweepTable(dataset, values, results, tf, tm)


def ablation(dataset: str, models: Sequence[str] = ABLATION_MODELS, **cfg_kwargs) -> list[ExperimentResult]:
    return [run_experiment(ExperimentConfig(dataset, m, **cfg_kwargs)) for m in models]


# ---------------------------------------------------------------------------
# reports

REPORT_COLUMNS = ("model", "dataset", "features", "f1", "mcc", "selected_features")


def fmt_mean_std(mean: float, std: float) -> str:
    return f"{mean:.1f}±{std:.1f}"


def _selected_cell(r: ExperimentResult) -> str:
    if all(s is None for s in r.selected):
        return ""
    n = len(r.seeds)
    parts = [f"{f} {c}/{n}" for f, c in r.selection_counts()]
    empty = sum(1 for s in r.selected if s is not None and not s)
    if empty:
        parts.append(f"no features selected {empty}/{n}")
    return "; ".join(parts)


def report_rows(results: Sequence[ExperimentResult]) -> list[dict]:
    return [{
        "model": r.label,
        "dataset": r.dataset,
        "features": r.feature_set,
        "f1": fmt_mean_std(r.f1_mean, r.f1_std),
        "mcc": fmt_mean_std(r.mcc_mean, r.mcc_std),
        "selected_features": _selected_cell(r),
    } for r in results]


def render_report(results: Sequence[ExperimentResult], fmt: str = "markdown") -> str:
    if not results:
        raise ValueError("nothing to report")
    rows = report_rows(results)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()
    if fmt == "markdown":
        head = ("Model", "Dataset", "Features", "F1 score (%)", "MCC (%)", "Selected features")
        lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
        for row in rows:
            lines.append("| " + " | ".join(row[c].replace("|", "\\|") for c in REPORT_COLUMNS) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def emit_report(results: Sequence[ExperimentResult], path: str | Path, fmt: str = "markdown") -> Path:
    path = Path(path)
    text = render_report(results, fmt)
    path.write_text(text, encoding="utf-8")
    return path


def _format_from_path(path) -> str:
    return "csv" if str(path).endswith(".csv") else "markdown"


def _parse_cell(s: str) -> tuple[float, float]:
    mean, std = s.split("±")
    return float(mean), float(std)


def parse_report(path_or_text: str | Path, fmt: str | None = None) -> list[dict]:
    """Read back a report; ``f1`` and ``mcc`` become (mean, std) float pairs."""
    p = Path(path_or_text) if not str(path_or_text).lstrip().startswith(("model", "|")) else None
    text = p.read_text(encoding="utf-8") if p is not None else str(path_or_text)
    fmt = fmt or ("markdown" if text.lstrip().startswith("|") else "csv")
    if fmt == "csv":
        rows = list(csv.DictReader(io.StringIO(text)))
    else:
        lines = [ln for ln in text.splitlines() if ln.startswith("|")][2:]
        rows = []
        for ln in lines:
            cells = [c.strip().replace("\\|", "|") for c in ln.strip().strip("|").split(" | ")]
            rows.append(dict(zip(REPORT_COLUMNS, cells)))
    for row in rows:
        row["f1"] = _parse_cell(row["f1"])
        row["mcc"] = _parse_cell(row["mcc"])
    return rows


def render_study(study: StudyTable) -> str:
    a_sets = study.feature_sets
    head = ["Model"] + [f"{fs} F1 (%)" for fs in a_sets] + [f"{fs} MCC (%)" for fs in a_sets]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for i, r0 in enumerate(study.results[a_sets[0]]):
        rs = [study.results[fs][i] for fs in a_sets]
        cells = [r0.label] + [fmt_mean_std(r.f1_mean, r.f1_std) for r in rs] \
            + [fmt_mean_std(r.mcc_mean, r.mcc_std) for r in rs]
        lines.append("| " + " | ".join(cells) + " |")
    lines.append("")
    for (a, b, metric), t in sorted(study.tests.items()):
        lines.append(f"paired t ({metric}) {a} vs {b}: t = {t.statistic:.3f}, p = {t.p_value:.4f}, df = {t.df}")
    return "\n".join(lines) + "\n"


def render_sweep(sweep: SweepTable) -> str:
    text = render_report(sweep.results, "markdown")
    for name, tk in (("F1", sweep.tukey_f1), ("MCC", sweep.tukey_mcc)):
        if tk is None:
            continue
        text += f"\nTukey HSD ({name}), p-values:\n"
        labels = [r.label for r in sweep.results]
        text += "| | " + " | ".join(labels) + " |\n|" + "---|" * (len(labels) + 1) + "\n"
        for i, lab in enumerate(labels):
            text += f"| {lab} | " + " | ".join(f"{p:.4f}" for p in tk.pvalues[i]) + " |\n"
    return text
