"""LASSO-Clip-EN for classification, plus its ablated and variant pipelines.

Every variant is the same three-stage search with different stage settings:

    stage 1   CV over (degree, l1_ratio, alpha) for a penalized logistic fit
              on the expanded design, then one fit on the whole training set
    clip      per cutoff: per-class masks from scaled coefficients, merged
              across classes by the min-classes rule (binary: the one mask)
    stage 2   CV over (column set, l1_ratio, alpha) on the surviving columns

Variants differ in the stage-1 penalty family and in how stage 2 searches:

    LCEN   lasso -> clip -> elastic net
    LC     lasso -> clip -> refit with the stage-1 penalty
    ENC    elastic net -> clip -> refit with the stage-1 penalty
    LEN    lasso -> cutoff 0 -> elastic net
    LCL    lasso -> clip -> lasso
    ENCEN  elastic net -> clip -> elastic net

Cutoff is one shared CV hyperparameter: it is chosen by the stage-2 score of
the column set it produces. Cutoffs that produce the same set share one CV
run, and the largest such cutoff is reported.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataprep import Dataset, kfold, standardize
from .expand import ExpandedDesign, evaluate_term, monomial_terms, term_name
from .linmodel import (DEFAULT_MAX_ITER, DEFAULT_TOL, LogisticFit, Penalty,
                       fit_logistic, predict as lin_predict, predict_proba as lin_predict_proba,
                       separated_subproblems)
from .metrics import scores

log = logging.getLogger(__name__)

ALPHA_GRID = (0.0,) + tuple(float(a) for a in np.logspace(-4.3, 0, 20))
L1_RATIO_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.97, 0.99)
# 0.01..0.1 in steps of 0.01; the wider menu adds 0.2..0.6
CUTOFF_GRID = tuple(round(0.01 * i, 2) for i in range(1, 11))
CUTOFF_GRID_WIDE = CUTOFF_GRID + (0.2, 0.3, 0.4, 0.5, 0.6)


@dataclass(frozen=True)
class _Plan:
    first: str   # stage-1 penalty family: "lasso" | "en"
    refit: str   # stage 2: "en" | "lasso" | "fixed" (reuse the stage-1 penalty)


VARIANTS = {
    "LCEN": _Plan("lasso", "en"),
    "LC": _Plan("lasso", "fixed"),
    "ENC": _Plan("en", "fixed"),
    "LEN": _Plan("lasso", "en"),
    "LCL": _Plan("lasso", "lasso"),
    "ENCEN": _Plan("en", "en"),
}


@dataclass(frozen=True)
class LcenConfig:
    degrees: tuple[int, ...] = (1, 2, 3)
    cutoffs: tuple[float, ...] = CUTOFF_GRID
    alphas: tuple[float, ...] = ALPHA_GRID
    l1_ratios: tuple[float, ...] = L1_RATIO_GRID
    min_classes_selected: int = 1
    variant: str = "LCEN"
    cv_folds: int = 5
    seed: int = 0
    selection_metric: str = "f1"   # "f1" or "mcc"; the other one breaks ties
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        for name in ("degrees", "cutoffs", "alphas", "l1_ratios"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ValueError(f"{name} grid is empty")
            object.__setattr__(self, name, vals)
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {sorted(VARIANTS)}")
        if self.variant == "LEN":
            object.__setattr__(self, "cutoffs", (0.0,))
        if any(not 0 <= c <= 1 for c in self.cutoffs):
            raise ValueError(f"cutoffs must lie in [0, 1], got {self.cutoffs}")
        if any(d not in (1, 2, 3) for d in self.degrees):
            raise ValueError(f"degrees must be in {{1, 2, 3}}, got {self.degrees}")
        if any(a < 0 for a in self.alphas) or any(not 0 <= r <= 1 for r in self.l1_ratios):
            raise ValueError("alphas must be >= 0 and l1_ratios in [0, 1]")
        if self.min_classes_selected < 1:
            raise ValueError("min_classes_selected must be >= 1")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")
        if self.selection_metric not in ("f1", "mcc"):
            raise ValueError("selection_metric must be 'f1' or 'mcc'")


# ---------------------------------------------------------------------------
# clip and harmonize


def scaled_coefficients(W: np.ndarray) -> np.ndarray:
    """|w_j| / max_k |w_k| per row; an all-zero row stays zero."""
    A = np.abs(np.atleast_2d(np.asarray(W, dtype=float)))
    top = A.max(axis=1, keepdims=True) if A.shape[1] else np.zeros((A.shape[0], 1))
    return np.divide(A, top, out=np.zeros_like(A), where=top > 0)


def clip_step(fit: LogisticFit | np.ndarray, cutoff: float) -> np.ndarray:
    """Per-class boolean masks, shape (K', P).

    A feature survives for a class when its scaled coefficient is >= cutoff.
    Exact zeros never survive, so cutoff 0 keeps the nonzero coefficients.
    """
    W = fit.W if isinstance(fit, LogisticFit) else np.atleast_2d(fit)
    S = scaled_coefficients(W)
    masks = (S >= cutoff) & (np.abs(W) > 0)
    for k in np.flatnonzero(~masks.any(axis=1)):
        log.debug("clip: class row %d has no surviving features", k)
    return masks


def harmonize(masks: np.ndarray, min_classes: int) -> np.ndarray:
    """Keep feature j when at least ``min_classes`` of the class masks select it."""
    masks = np.atleast_2d(np.asarray(masks, dtype=bool))
    if not 1 <= min_classes <= masks.shape[0]:
        raise ValueError(f"min_classes must lie in [1, {masks.shape[0]}], got {min_classes}")
    return masks.sum(axis=0) >= min_classes


# ---------------------------------------------------------------------------
# designs


@dataclass(frozen=True)
class DesignTransform:
    """Raw matrix -> standardized expanded design, with training statistics."""
    degree: int
    terms: tuple[tuple[int, ...], ...]
    x_means: np.ndarray
    x_stds: np.ndarray
    z_means: np.ndarray
    z_stds: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray, degree: int) -> tuple["DesignTransform", np.ndarray]:
        Xs, _, xm, xs = standardize(X, allow_constant=True)
        terms = tuple(monomial_terms(X.shape[1], degree))
        Z, _, zm, zs = standardize(evaluate_term(terms, Xs), allow_constant=True)
        return cls(degree, terms, xm, xs, zm, zs), Z

    def __call__(self, X: np.ndarray) -> np.ndarray:
        Xs = (np.asarray(X, dtype=float) - self.x_means) / self.x_stds
        return (evaluate_term(self.terms, Xs) - self.z_means) / self.z_stds

    @property
    def n_columns(self) -> int:
        return len(self.terms)


class _FoldDesigns:
    """Standardized expanded designs per (fold, degree), built on first use."""

    def __init__(self, X: np.ndarray, y: np.ndarray, folds):
        self.X, self.y, self.folds = X, y, folds
        self._cache: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

    def get(self, f: int, degree: int):
        key = (f, degree)
        if key not in self._cache:
            tr, va = self.folds[f]
            tf, Ztr = DesignTransform.fit(self.X[tr], degree)
            self._cache[key] = (Ztr, tf(self.X[va]))
        Ztr, Zva = self._cache[key]
        tr, va = self.folds[f]
        return Ztr, self.y[tr], Zva, self.y[va]


# ---------------------------------------------------------------------------
# CV machinery


@dataclass(frozen=True)
class CvCell:
    degree: int
    columns: tuple[int, ...] | None   # None = every expanded column (stage 1)
    cutoff: float | None
    l1_ratio: float
    alpha: float
    f1: float
    mcc: float
    failed: bool

    @property
    def n_columns(self) -> int:
        return -1 if self.columns is None else len(self.columns)


def _fit_cell(Z, y, penalty, K, warm, cfg: LcenConfig) -> LogisticFit | None:
    """Fit one grid cell; None when the cell is known to have no solution."""
    if penalty.alpha == 0 and Z.shape[1] and separated_subproblems(Z, y, n_classes=K):
        log.debug("alpha=0 cell skipped: classes are linearly separable (P=%d)", Z.shape[1])
        return None
    fit = fit_logistic(Z, y, penalty, n_classes=K, tol=cfg.tol, max_iter=cfg.max_iter, warm_start=warm)
    if not fit.converged:
        # one retry that resumes from the capped iterate with 10x the budget
        fit = fit_logistic(Z, y, penalty, n_classes=K, tol=cfg.tol, max_iter=10 * cfg.max_iter, warm_start=fit)
        if not fit.converged:
            log.info("cell failed to converge (alpha=%g, l1_ratio=%g, P=%d)",
                     penalty.alpha, penalty.l1_ratio, Z.shape[1])
    return fit


def _refit(Z, y, penalty, K, cfg: LcenConfig) -> LogisticFit:
    fit = _fit_cell(Z, y, penalty, K, None, cfg)
    if fit is None:
        # the full training set separates although no CV fold did
        log.warning("refit at alpha=0 on separable data; keeping the capped iterate")
        fit = fit_logistic(Z, y, penalty, n_classes=K, tol=cfg.tol, max_iter=cfg.max_iter)
    return fit


def _cv_grid(designs: _FoldDesigns, K: int, degree: int, columns, cutoff,
             l1_ratios: Sequence[float], alphas: Sequence[float], cfg: LcenConfig) -> list[CvCell]:
    """CV every (l1_ratio, alpha) pair on one column set.

    Alphas run from large to small with warm starts. alpha = 0 is the same
    unpenalized problem for every l1_ratio, so it is solved once per fold.
    """
    order = sorted(set(alphas), reverse=True)
    per_cell: dict[tuple[float, float], list] = {(r, a): [] for r in l1_ratios for a in order}
    for f in range(len(designs.folds)):
        Ztr, ytr, Zva, yva = designs.get(f, degree)
        if columns is not None:
            idx = list(columns)
            Ztr, Zva = Ztr[:, idx], Zva[:, idx]
        unpenalized = None
        for r in l1_ratios:
            warm = None
            for a in order:
                if a == 0.0 and unpenalized is not None:
                    fit = unpenalized
                else:
                    fit = _fit_cell(Ztr, ytr, Penalty(a, r), K, warm, cfg)
                    if a == 0.0:
                        unpenalized = fit
                if fit is None:
                    per_cell[(r, a)].append((np.nan, np.nan, False))
                    continue
                warm = fit
                pred = lin_predict(fit, Zva)
                per_cell[(r, a)].append((*scores(yva, pred, K), fit.converged))
    cells = []
    for (r, a), rows in per_cell.items():
        arr = np.array([row[:2] for row in rows])
        failed = not all(row[2] for row in rows)
        f1, mcc = (np.nan, np.nan) if failed else (float(arr[:, 0].mean()), float(arr[:, 1].mean()))
        cells.append(CvCell(degree, columns, cutoff, r, a, f1, mcc, failed))
    return cells


def _rank_key(cell: CvCell, metric: str, stage: int):
    # rounding keeps float noise from deciding between equal CV scores
    f1, mcc = round(cell.f1, 9), round(cell.mcc, 9)
    primary = (f1, mcc) if metric == "f1" else (mcc, f1)
    if stage == 1:
        smaller = (-cell.degree, cell.alpha, cell.l1_ratio)
    else:
        smaller = (-cell.n_columns, cell.alpha, cell.l1_ratio, cell.cutoff)
    return primary + smaller


def _select(cells: list[CvCell], metric: str, stage: int) -> CvCell:
    ok = [c for c in cells if not c.failed]
    if not ok:
        raise RuntimeError("every CV cell failed; widen the alpha grid beyond alpha = 0")
    return max(ok, key=lambda c: _rank_key(c, metric, stage))


# ---------------------------------------------------------------------------
# model


@dataclass
class LcenModel:
    config: LcenConfig
    n_classes: int
    transform: DesignTransform
    per_class_masks: np.ndarray      # (K', P) post-clip, pre-harmonization
    final_mask: np.ndarray           # (P,)
    final_fit: LogisticFit           # fit on the surviving columns only
    stage1_fit: LogisticFit
    chosen: dict
    cv_stage1: list[CvCell] = field(default_factory=list, repr=False)
    cv_stage2: list[CvCell] = field(default_factory=list, repr=False)
    timings: dict = field(default_factory=dict)

    @property
    def selected_columns(self) -> np.ndarray:
        return np.flatnonzero(self.final_mask)

    @property
    def no_features_selected(self) -> bool:
        return not self.final_mask.any()

    @property
    def parent_map(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(sorted(set(t))) for t in self.transform.terms)

    def column_names(self, feature_names: Sequence[str] | None = None) -> list[str]:
        return [term_name(t, feature_names) for t in self.transform.terms]

    @property
    def feature_importance(self) -> list[tuple[int, float]]:
        """(expanded column, max over classes of |coefficient|), largest first."""
        W = np.abs(self.final_fit.W)
        imp = W.max(axis=0) if W.size else np.zeros(0)
        order = sorted(range(len(imp)), key=lambda j: (-imp[j], self.selected_columns[j]))
        return [(int(self.selected_columns[j]), float(imp[j])) for j in order]

    def design(self, X: np.ndarray) -> np.ndarray:
        return self.transform(X)[:, self.selected_columns]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return lin_predict(self.final_fit, self.design(X))

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return lin_predict_proba(self.final_fit, self.design(X))


def fit_lcen(train: Dataset, config: LcenConfig) -> LcenModel:
    X, y, K = train.X, train.y, train.n_classes
    if config.min_classes_selected > K:
        raise ValueError(f"min_classes_selected={config.min_classes_selected} exceeds {K} classes")
    plan = VARIANTS[config.variant]
    folds = kfold(len(y), config.cv_folds, config.seed)
    designs = _FoldDesigns(X, y, folds)
    metric = config.selection_metric

    t0 = time.perf_counter()
    first_ratios = (1.0,) if plan.first == "lasso" else config.l1_ratios
    cv1 = []
    for d in config.degrees:
        cv1 += _cv_grid(designs, K, d, None, None, first_ratios, config.alphas, config)
    best1 = _select(cv1, metric, stage=1)
    transform, Z = DesignTransform.fit(X, best1.degree)
    fit1 = _refit(Z, y, Penalty(best1.alpha, best1.l1_ratio), K, config)
    t1 = time.perf_counter()

    # clip + harmonize for every cutoff; identical column sets share one CV run
    sets: dict[tuple[int, ...], tuple[float, np.ndarray]] = {}
    for c in sorted(config.cutoffs):
        masks = clip_step(fit1, c)
        final = masks[0] if fit1.mode == "binary" else harmonize(masks, config.min_classes_selected)
        sets[tuple(np.flatnonzero(final).tolist())] = (c, masks)

    if plan.refit == "fixed":
        ratios, alphas = (best1.l1_ratio,), (best1.alpha,)
    elif plan.refit == "lasso":
        ratios, alphas = (1.0,), config.alphas
    else:
        ratios, alphas = config.l1_ratios, config.alphas
    cv2 = []
    for cols, (c, _) in sets.items():
        cv2 += _cv_grid(designs, K, best1.degree, cols, c, ratios, alphas, config)
    best2 = _select(cv2, metric, stage=2)
    cols = list(best2.columns)
    final_fit = _refit(Z[:, cols], y, Penalty(best2.alpha, best2.l1_ratio), K, config)
    t2 = time.perf_counter()

    final_mask = np.zeros(transform.n_columns, dtype=bool)
    final_mask[cols] = True
    if not cols:
        log.warning("%s: no features selected; falling back to an intercept-only model", config.variant)
    chosen = {
        "degree": best1.degree,
        "stage1_alpha": best1.alpha,
        "stage1_l1_ratio": best1.l1_ratio,
        "cutoff": best2.cutoff,
        "alpha": best2.alpha,
        "l1_ratio": best2.l1_ratio,
        "cv_f1": best2.f1,
        "cv_mcc": best2.mcc,
    }
    return LcenModel(config, K, transform, sets[best2.columns][1], final_mask, final_fit, fit1, chosen,
                     cv1, cv2, {"stage1": t1 - t0, "stage2": t2 - t1, "total": t2 - t0})


def selected_raw_features(model: LcenModel, design: ExpandedDesign | None = None,
                          feature_names: Sequence[str] | None = None) -> list:
    """Raw features behind the surviving columns, most important first.

    A raw feature is ranked by the largest importance among the surviving
    columns it contributes to; ties go to the lower feature index. Returns
    names when ``feature_names`` is given, otherwise indices.
    """
    parents = design.parent_map if design is not None else model.parent_map
    best: dict[int, float] = {}
    for col, imp in model.feature_importance:
        for p in parents[col]:
            best[p] = max(best.get(p, -np.inf), imp)
    ranked = sorted(best, key=lambda p: (-best[p], p))
    return [feature_names[p] for p in ranked] if feature_names is not None else ranked


def model_report(model: LcenModel, feature_names: Sequence[str] | None = None,
                 class_names: Sequence[str] | None = None) -> str:
    """Plain-text export: surviving columns, coefficients and the logit per class.

    Columns are written as z(term), the term evaluated on standardized raw
    features and then standardized with the training mean/std listed below.
    """
    names = model.column_names(feature_names)
    cols = model.selected_columns
    ch = model.chosen
    lines = [
        f"{model.config.variant}-{model.config.min_classes_selected}: degree={ch['degree']} cutoff={ch['cutoff']} "
        f"alpha={ch['alpha']:.6g} l1_ratio={ch['l1_ratio']}",
        f"{len(cols)} of {model.transform.n_columns} expanded columns kept",
    ]
    if model.no_features_selected:
        lines.append("no features selected: intercept-only model")
    fit = model.final_fit
    rows = range(fit.W.shape[0])
    for k in rows:
        if fit.mode == "binary":
            label = class_names[1] if class_names else "class 1"
        else:
            label = class_names[k] if class_names else f"class {k}"
        terms = [f"{fit.b[k]:+.6g}"]
        terms += [f"{fit.W[k, j]:+.6g}*z({names[c]})" for j, c in enumerate(cols) if fit.W[k, j] != 0]
        lines.append(f"logit[{label}] = " + " ".join(terms))
    lines.append("column  mean  std")
    for c in cols:
        lines.append(f"{names[c]}  {model.transform.z_means[c]:.6g}  {model.transform.z_stds[c]:.6g}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# plain penalized baselines (LR / LASSO / RR / EN) on the same CV machinery


@dataclass
class PenalizedModel:
    transform: DesignTransform
    fit: LogisticFit
    chosen: dict
    cv: list[CvCell] = field(default_factory=list, repr=False)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return lin_predict(self.fit, self.transform(X))

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return lin_predict_proba(self.fit, self.transform(X))


def fit_penalized_cv(train: Dataset, l1_ratios: Sequence[float], alphas: Sequence[float], *,
                     cv_folds: int = 5, seed: int = 0, degree: int = 1, selection_metric: str = "f1",
                     tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> PenalizedModel:
    """Penalized logistic regression with (l1_ratio, alpha) chosen by K-fold CV.

    A single-cell grid skips CV, which is how unpenalized LR is fit.
    """
    cfg = LcenConfig(degrees=(degree,), alphas=tuple(alphas), l1_ratios=tuple(l1_ratios),
                     cv_folds=cv_folds, seed=seed, selection_metric=selection_metric,
                     tol=tol, max_iter=max_iter)
    X, y, K = train.X, train.y, train.n_classes
    cells: list[CvCell] = []
    if len(cfg.alphas) * len(cfg.l1_ratios) == 1:
        r, a = cfg.l1_ratios[0], cfg.alphas[0]
    else:
        designs = _FoldDesigns(X, y, kfold(len(y), cv_folds, seed))
        cells = _cv_grid(designs, K, degree, None, None, cfg.l1_ratios, cfg.alphas, cfg)
        best = _select(cells, selection_metric, stage=1)
        r, a = best.l1_ratio, best.alpha
    transform, Z = DesignTransform.fit(X, degree)
    fit = _refit(Z, y, Penalty(a, r), K, cfg)
    return PenalizedModel(transform, fit, {"alpha": a, "l1_ratio": r, "degree": degree}, cells)
