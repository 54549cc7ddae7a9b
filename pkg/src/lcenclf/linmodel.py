"""Penalized logistic regression (binary and one-vs-rest).

Minimizes, per binary subproblem,

    mean_i [log(1 + exp(z_i)) - t_i z_i] + alpha * (l1_ratio * |w|_1 + (1 - l1_ratio) / 2 * |w|_2^2)

with ``z = Z w + b``. The intercept is never penalized. One-vs-rest fits all
K subproblems as one separable problem with a shared step size, which gives
the same minimizers as K independent fits.

The solver is monotone accelerated proximal gradient (FISTA with
backtracking, objective safeguard and restart). Monotone means up to a
relative slack of 1e-12, the size of rounding noise in the objective. Soft-thresholding in the
proximal step produces exact zeros.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.special import expit

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 10_000


@dataclass(frozen=True)
class Penalty:
    alpha: float = 0.0
    l1_ratio: float = 1.0

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not 0 <= self.l1_ratio <= 1:
            raise ValueError(f"l1_ratio must lie in [0, 1], got {self.l1_ratio}")

    def value(self, W: np.ndarray) -> float:
        if self.alpha == 0:
            return 0.0
        w = np.ravel(W)
        return self.alpha * (self.l1_ratio * np.abs(w).sum() + 0.5 * (1 - self.l1_ratio) * np.dot(w, w))


@dataclass
class LogisticFit:
    W: np.ndarray           # (K', P); K' = 1 for binary
    b: np.ndarray           # (K',)
    penalty: Penalty
    mode: str               # "binary" | "one_vs_rest"
    n_classes: int
    converged: bool
    n_iter: int
    objective: float
    lipschitz: float = 1.0  # last accepted curvature estimate; reused for warm starts
    history: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_features(self) -> int:
        return self.W.shape[1]


def _targets(y: np.ndarray, mode: str, n_classes: int) -> np.ndarray:
    if mode == "binary":
        return (y == 1).astype(float)[:, None]
    return (y[:, None] == np.arange(n_classes)[None, :]).astype(float)


def _loss_at(u, T, n):
    # log(1 + e^u) written stably; np.logaddexp is several times slower here
    softplus = np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))
    return (softplus.sum() - np.vdot(T, u)) / n


def _loss_only(Z, T, W, b):
    return _loss_at(Z @ W + b, T, Z.shape[0])


def _prox(V, step, alpha, l1_ratio):
    if alpha == 0:
        return V
    shrunk = np.abs(V) - step * alpha * l1_ratio
    np.maximum(shrunk, 0.0, out=shrunk)
    return np.copysign(shrunk, V) / (1.0 + step * alpha * (1.0 - l1_ratio))


def _prior_logit(T: np.ndarray) -> np.ndarray:
    p = np.clip(T.mean(axis=0), 1e-12, 1 - 1e-12)
    return np.log(p / (1 - p))


def _solve(Z, T, penalty, W, b, L, tol, max_iter, record):
    """Monotone FISTA on the joint (W, b) problem. Returns the final state.

    Linear predictors are carried along with the iterates, so each iteration
    costs one product with Z (the trial point) and one with Z.T (gradient).
    """
    alpha, l1 = penalty.alpha, penalty.l1_ratio
    n = Z.shape[0]
    ZT = np.ascontiguousarray(Z.T)
    ux = Z @ W + b
    Fx = _loss_at(ux, T, n) + penalty.value(W)
    hist = [Fx] if record else None
    yW, yb, uy = W, b, ux
    t = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        fy = _loss_at(uy, T, n)
        r = (expit(uy) - T) / n
        gW, gb = ZT @ r, r.sum(axis=0)
        while True:
            step = 1.0 / L
            zW = _prox(yW - step * gW, step, alpha, l1)
            zb = yb - step * gb
            uz = Z @ zW + zb
            fz = _loss_at(uz, T, n)
            dW, db = zW - yW, zb - yb
            quad = fy + np.vdot(gW, dW) + gb @ db + 0.5 * L * (np.vdot(dW, dW) + db @ db)
            if fz <= quad + 1e-12 * max(1.0, abs(fy)):
                break
            L *= 2.0
        Fz = fz + penalty.value(zW)
        # near the optimum a proximal step can raise F by rounding noise alone;
        # rejecting it forever would stall the loop without testing convergence
        accepted = Fz <= Fx + 1e-12 * max(1.0, abs(Fx))
        if accepted:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            # gradient restart: momentum pointing against the prox step is dropped,
            # which keeps convergence linear on strongly convex subproblems
            if np.vdot(yW - zW, zW - W) + (yb - zb) @ (zb - b) > 0:
                t_new, beta = 1.0, 0.0
            else:
                beta = (t - 1.0) / t_new
            change = max(np.abs(zW - W).max(), np.abs(zb - b).max())
            yW, yb, uy = zW + beta * (zW - W), zb + beta * (zb - b), uz + beta * (uz - ux)
            W, b, ux, Fx, t = zW, zb, uz, Fz, t_new
        else:
            # objective went up: drop the momentum and restart from the current iterate
            change = np.inf
            yW, yb, uy, t = W, b, ux, 1.0
        if record:
            hist.append(Fx)
        if accepted and change < tol:
            converged = True
            break
        # let the curvature estimate relax so flat regions get longer steps
        L *= 0.95
    return W, b, Fx, L, converged, it, (np.array(hist) if record else None)


def fit_logistic(
    Z: np.ndarray,
    y: np.ndarray,
    penalty: Penalty,
    mode: str = "auto",
    *,
    n_classes: int | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    warm_start: LogisticFit | None = None,
    record_history: bool = False,
) -> LogisticFit:
    """Fit a penalized logistic model on a standardized design.

    Parameters
    ----------
    Z : (N, P) array
        Design matrix; callers standardize it.
    y : (N,) int array
        Labels in ``0..K-1``.
    penalty : Penalty
    mode : {"auto", "binary", "one_vs_rest"}
        ``auto`` picks binary when there are two classes.
    n_classes : int, optional
        Total class count; needed when a fold happens to miss a class.
    warm_start : LogisticFit, optional
        Starting coefficients (e.g. the previous point on an alpha path).
    """
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y).astype(int)
    if Z.ndim != 2 or Z.shape[0] != y.shape[0]:
        raise ValueError(f"Z {Z.shape} and y {y.shape} disagree")
    if not np.isfinite(Z).all():
        raise ValueError("non-finite values in design matrix")
    present = np.unique(y)
    if len(present) < 2:
        raise ValueError(f"need at least 2 classes in y, found {present.tolist()}")
    K = int(n_classes if n_classes is not None else y.max() + 1)
    if mode == "auto":
        mode = "binary" if K == 2 else "one_vs_rest"
    if mode == "binary" and K != 2:
        raise ValueError("binary mode needs exactly 2 classes")
    if mode not in ("binary", "one_vs_rest"):
        raise ValueError(f"unknown mode {mode!r}")

    T = _targets(y, mode, K)
    P = Z.shape[1]
    # a class missing from this sample (possible inside a CV fold) is not fit:
    # it keeps W = 0 and a very negative intercept
    live = T.sum(axis=0) > 0
    W = np.zeros((P, T.shape[1]))
    b = np.full(T.shape[1], -30.0)
    b[live] = _prior_logit(T[:, live])
    # cheap lower estimate of the curvature; backtracking corrects it upward
    L = max(0.25 * (Z * Z).sum() / max(P, 1) / Z.shape[0], 1e-3)
    if warm_start is not None and warm_start.W.shape == (T.shape[1], P):
        W, b, L = warm_start.W.T.copy(), warm_start.b.copy(), warm_start.lipschitz

    if P == 0:
        Fx = _loss_only(Z, T, W, b)
        return LogisticFit(W.T.copy(), b, penalty, mode, K, True, 0, float(Fx), L)

    Wl, bl, Fx, L, converged, n_iter, hist = _solve(
        Z, T[:, live], penalty, W[:, live], b[live], L, tol, max_iter, record_history)
    W[:, live], b[live] = Wl, bl
    if not converged:
        log.debug("logistic fit hit max_iter=%d (alpha=%g, l1_ratio=%g)", max_iter, penalty.alpha, penalty.l1_ratio)
    return LogisticFit(W.T.copy(), b.copy(), penalty, mode, K, converged, n_iter, float(Fx), L, hist)


def decision_function(fit: LogisticFit, Z: np.ndarray) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[1] != fit.W.shape[1]:
        raise ValueError(f"design has {Z.shape[-1]} columns, fit expects {fit.W.shape[1]}")
    return Z @ fit.W.T + fit.b


def predict_proba(fit: LogisticFit, Z: np.ndarray) -> np.ndarray:
    s = expit(decision_function(fit, Z))
    if fit.mode == "binary":
        return np.column_stack([1.0 - s[:, 0], s[:, 0]])
    s = np.maximum(s, 1e-300)
    return s / s.sum(axis=1, keepdims=True)


def predict(fit: LogisticFit, Z: np.ndarray) -> np.ndarray:
    if fit.mode == "binary":
        return (decision_function(fit, Z)[:, 0] > 0).astype(int)
    return np.argmax(decision_function(fit, Z), axis=1)


def objective(Z: np.ndarray, y: np.ndarray, W: np.ndarray, b: np.ndarray, penalty: Penalty,
              mode: str = "auto", n_classes: int | None = None) -> float:
    """Penalized objective for given coefficients, ``W`` shaped (K', P)."""
    y = np.asarray(y).astype(int)
    K = int(n_classes if n_classes is not None else y.max() + 1)
    if mode == "auto":
        mode = "binary" if K == 2 else "one_vs_rest"
    T = _targets(y, mode, K)
    W = np.atleast_2d(W)
    return float(_loss_only(np.asarray(Z, float), T, W.T, np.atleast_1d(b)) + penalty.value(W))


def separated_subproblems(Z: np.ndarray, y: np.ndarray, mode: str = "auto",
                          n_classes: int | None = None) -> list[int]:
    """Binary subproblems whose classes a hyperplane splits perfectly.

    Complete separation means the unpenalized likelihood has no finite
    maximizer, so an alpha = 0 fit can only run to its iteration cap. Checked
    as LP feasibility of ``s_i (z_i w + b) >= 1``.
    """
    y = np.asarray(y).astype(int)
    K = int(n_classes if n_classes is not None else y.max() + 1)
    if mode == "auto":
        mode = "binary" if K == 2 else "one_vs_rest"
    T = _targets(y, mode, K)
    A = np.column_stack([np.asarray(Z, dtype=float), np.ones(len(y))])
    out = []
    for k in range(T.shape[1]):
        if T[:, k].min() == T[:, k].max():
            continue
        s = np.where(T[:, k] > 0, 1.0, -1.0)
        res = linprog(np.zeros(A.shape[1]), A_ub=-s[:, None] * A, b_ub=-np.ones(len(y)),
                      bounds=(None, None), method="highs")
        if res.status == 0:
            out.append(k)
    return out
