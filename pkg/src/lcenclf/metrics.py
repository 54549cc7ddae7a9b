"""Classification metrics and the two significance tests used in the tables.

Metrics are returned in percent. MCC for K > 2 is the K-category correlation
coefficient computed from the confusion matrix; for K = 2 it is the classical
binary formula (the two agree, see tests).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats
from scipy.special import ndtr

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # rows = truth, cols = prediction

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"confusion matrix must be square, got shape {c.shape}")
        if (c < 0).any():
            raise ValueError("negative counts")
        object.__setattr__(self, "counts", c.astype(np.int64))

    @property
    def K(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_labels(cls, y_true, y_pred, n_classes: int) -> "ConfusionMatrix":
        y_true = np.asarray(y_true, dtype=int)
        y_pred = np.asarray(y_pred, dtype=int)
        if y_true.shape != y_pred.shape:
            raise ValueError("y_true and y_pred differ in length")
        counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(counts, (y_true, y_pred), 1)
        return cls(counts)


def _as_cm(cm) -> ConfusionMatrix:
    cm = cm if isinstance(cm, ConfusionMatrix) else ConfusionMatrix(np.asarray(cm))
    if cm.K < 2:
        raise ValueError("need at least 2 classes")
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    return cm


def per_class_f1(cm) -> np.ndarray:
    c = _as_cm(cm).counts.astype(float)
    tp = np.diag(c)
    denom = c.sum(axis=0) + c.sum(axis=1)  # 2tp + fp + fn
    # a class nobody predicted and nobody has gets 0, not NaN
    return np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)


def macro_f1(cm) -> float:
    return float(100.0 * per_class_f1(cm).mean())


def mcc(cm) -> float:
    cm = _as_cm(cm)
    c = cm.counts.astype(float)
    if cm.K == 2:
        tn, fp, fn, tp = c[0, 0], c[0, 1], c[1, 0], c[1, 1]
        den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
        return 0.0 if den == 0 else float(100.0 * (tp * tn - fp * fn) / np.sqrt(den))
    s = c.sum()
    correct = np.trace(c)
    t = c.sum(axis=1)  # true counts per class
    p = c.sum(axis=0)  # predicted counts per class
    den = (s * s - p @ p) * (s * s - t @ t)
    return 0.0 if den == 0 else float(100.0 * (correct * s - p @ t) / np.sqrt(den))


def scores(y_true, y_pred, n_classes: int) -> tuple[float, float]:
    """(macro F1, MCC) in percent."""
    cm = ConfusionMatrix.from_labels(y_true, y_pred, n_classes)
    return macro_f1(cm), mcc(cm)


# ---------------------------------------------------------------------------
# significance tests


class PairedT(NamedTuple):
    statistic: float
    p_value: float
    df: int
    degenerate: bool


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> PairedT:
    """Two-sided paired t-test on ``a - b``."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"samples must be 1-D and equally long, got {a.shape} and {b.shape}")
    n = a.size
    if n < 2:
        raise ValueError("need at least 2 pairs")
    d = a - b
    mean, sd = d.mean(), d.std(ddof=1)
    if sd == 0 or not np.isfinite(sd):
        if mean == 0:
            return PairedT(0.0, 1.0, n - 1, True)
        log.warning("paired t-test: all differences equal (%g); p set to 0", mean)
        return PairedT(float(np.copysign(np.inf, mean)), 0.0, n - 1, True)
    t = mean / (sd / np.sqrt(n))
    p = 2.0 * stats.t.sf(abs(t), n - 1)
    return PairedT(float(t), float(min(p, 1.0)), n - 1, False)


# Studentized range distribution by quadrature. Inner integral over z with
# Gauss-Legendre on [-8, 8]; outer expectation over S = sqrt(chi2_df / df)
# taken in probability space (u = chi2 cdf) so heavy tails at small df are
# handled by the same fixed rule. Absolute error is below 1e-5 for k <= 20
# and df >= 2 (checked against scipy's implementation in the test suite).
_Z_NODES, _Z_WEIGHTS = np.polynomial.legendre.leggauss(160)
_Z_NODES, _Z_WEIGHTS = 8.0 * _Z_NODES, 8.0 * _Z_WEIGHTS
_U_NODES, _U_WEIGHTS = np.polynomial.legendre.leggauss(400)
_U_NODES, _U_WEIGHTS = 0.5 * (_U_NODES + 1.0), 0.5 * _U_WEIGHTS


def _range_cdf_known_sigma(w: np.ndarray, k: int) -> np.ndarray:
    """P(range of k iid N(0,1) <= w), vectorized over w."""
    z = _Z_NODES[None, :]
    inner = np.clip(ndtr(z) - ndtr(z - w[:, None]), 0.0, 1.0) ** (k - 1)
    dens = np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)
    return np.clip(k * (inner * dens) @ _Z_WEIGHTS, 0.0, 1.0)


def studentized_range_cdf(q: float, k: int, df: float) -> float:
    if k < 2:
        raise ValueError("k must be >= 2")
    if q <= 0:
        return 0.0
    if not np.isfinite(df):
        return float(_range_cdf_known_sigma(np.array([q]), k)[0])
    s = np.sqrt(stats.chi2.ppf(_U_NODES, df) / df)
    return float(np.clip(_range_cdf_known_sigma(q * s, k) @ _U_WEIGHTS, 0.0, 1.0))


def studentized_range_sf(q: float, k: int, df: float) -> float:
    return 1.0 - studentized_range_cdf(q, k, df)


@dataclass(frozen=True)
class TukeyResult:
    pvalues: np.ndarray  # (G, G), unit diagonal
    q: np.ndarray        # (G, G) studentized statistics
    mse: float
    df: int
    degenerate: bool


def tukey_hsd(groups: Sequence[Sequence[float]]) -> TukeyResult:
    """All-pairs Tukey-Kramer comparison with the pooled within-group variance."""
    groups = [np.asarray(g, float) for g in groups]
    G = len(groups)
    if G < 2:
        raise ValueError("need at least 2 groups")
    if any(g.ndim != 1 or g.size < 2 for g in groups):
        raise ValueError("each group needs at least 2 observations")
    n = np.array([g.size for g in groups])
    means = np.array([g.mean() for g in groups])
    df = int(n.sum() - G)
    mse = sum(((g - g.mean()) ** 2).sum() for g in groups) / df
    q = np.zeros((G, G))
    pv = np.ones((G, G))
    degenerate = mse == 0
    if degenerate:
        log.warning("tukey_hsd: zero pooled variance")
    for i in range(G):
        for j in range(i + 1, G):
            diff = abs(means[i] - means[j])
            if degenerate:
                q[i, j] = 0.0 if diff == 0 else np.inf
                p = 1.0 if diff == 0 else 0.0
            else:
                q[i, j] = diff / np.sqrt(mse / 2.0 * (1.0 / n[i] + 1.0 / n[j]))
                p = studentized_range_sf(q[i, j], G, df)
            q[j, i] = q[i, j]
            pv[i, j] = pv[j, i] = p
    return TukeyResult(pv, q, float(mse), df, bool(degenerate))
