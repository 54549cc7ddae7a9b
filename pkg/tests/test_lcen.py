import re
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from lcenclf.dataprep import Dataset, make_synthetic
from lcenclf.expand import expand_features
from lcenclf.lcen import (
    ALPHA_GRID, CUTOFF_GRID, LcenConfig, LcenModel, clip_step, fit_lcen, fit_penalized_cv, harmonize,
    model_report, scaled_coefficients, selected_raw_features,
)
from lcenclf.linmodel import LogisticFit, Penalty, decision_function, fit_logistic

SMALL = dict(degrees=(1, 2), cutoffs=(0.05, 0.3, 0.6), alphas=(0.0, 0.003, 0.03, 0.3),
             l1_ratios=(0.0, 0.5, 0.9), cv_folds=3)


@pytest.fixture(scope="module")
def three_class():
    ds = make_synthetic(150, 6, 3, (0.4, 0.3, 0.3), seed=4)
    return ds


@pytest.fixture(scope="module")
def binary():
    return make_synthetic(120, 5, 2, (0.5, 0.5), seed=1)


@pytest.fixture(scope="module")
def lcen3(three_class):
    return fit_lcen(three_class, LcenConfig(**SMALL))


# clip ----------------------------------------------------------------------

def test_clip_hand_example():
    w = np.array([[0.5, 0.05, 0.0]])
    assert np.allclose(scaled_coefficients(w), [[1.0, 0.1, 0.0]])
    assert clip_step(w, 0.2).tolist() == [[True, False, False]]


def test_clip_zero_cutoff_keeps_nonzeros():
    assert clip_step(np.array([[0.5, 0.05, 0.0]]), 0.0).tolist() == [[True, True, False]]


def test_clip_unit_cutoff_keeps_argmax():
    w = np.array([[0.2, -0.9, 0.9, 0.1], [0.0, 0.3, 0.0, 0.0]])
    assert clip_step(w, 1.0).tolist() == [[False, True, True, False], [False, True, False, False]]


def test_clip_zero_row_is_empty():
    assert not clip_step(np.zeros((2, 4)), 0.0).any()


def test_clip_accepts_fit():
    fit = LogisticFit(np.array([[1.0, -0.4]]), np.zeros(1), Penalty(), "binary", 2, True, 1, 0.0)
    assert clip_step(fit, 0.5).tolist() == [[True, False]]


coef_rows = arrays(float, st.tuples(st.integers(1, 4), st.integers(1, 8)),
                   elements=st.floats(-10, 10, allow_subnormal=False))


@given(coef_rows, st.floats(0, 1), st.floats(1e-3, 1e3))
def test_clip_scale_invariant(W, cutoff, c):
    assert (clip_step(W, cutoff) == clip_step(c * W, cutoff)).all()


@given(coef_rows, st.floats(0, 1), st.floats(0, 1))
def test_clip_monotone_in_cutoff(W, a, b):
    lo, hi = sorted((a, b))
    assert (clip_step(W, hi) <= clip_step(W, lo)).all()


# harmonize -----------------------------------------------------------------

def test_harmonize_counts_example():
    masks = np.array([[1, 0, 0], [1, 1, 0], [1, 1, 0]], dtype=bool)
    assert harmonize(masks, 2).tolist() == [True, True, False]


def test_harmonize_two_of_three_is_dropped_at_three():
    masks = np.array([[1, 1], [1, 1], [1, 0]], dtype=bool)
    assert harmonize(masks, 3).tolist() == [True, False]


@pytest.mark.parametrize("k", [0, 4])
def test_harmonize_rejects_out_of_range(k):
    with pytest.raises(ValueError):
        harmonize(np.ones((3, 2), dtype=bool), k)


mask_sets = arrays(bool, st.tuples(st.integers(1, 5), st.integers(0, 10)))


@given(mask_sets)
def test_harmonize_union_and_intersection(masks):
    K = masks.shape[0]
    assert (harmonize(masks, 1) == masks.any(axis=0)).all()
    assert (harmonize(masks, K) == masks.all(axis=0)).all()


@given(mask_sets, st.data())
def test_harmonize_monotone(masks, data):
    K = masks.shape[0]
    a = data.draw(st.integers(1, K))
    b = data.draw(st.integers(a, K))
    assert (harmonize(masks, b) <= harmonize(masks, a)).all()


# config --------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        LcenConfig(cutoffs=(1.5,))
    with pytest.raises(ValueError):
        LcenConfig(variant="LCX")
    with pytest.raises(ValueError):
        LcenConfig(alphas=())
    with pytest.raises(ValueError):
        LcenConfig(min_classes_selected=0)
    assert LcenConfig(variant="LEN", cutoffs=(0.1, 0.2)).cutoffs == (0.0,)


def test_default_grids():
    assert len(ALPHA_GRID) == 21 and ALPHA_GRID[0] == 0.0
    assert np.allclose(np.log10(ALPHA_GRID[1:]), np.linspace(-4.3, 0, 20))
    assert len(LcenConfig().l1_ratios) == 13
    assert CUTOFF_GRID[0] == 0.01 and CUTOFF_GRID[-1] == 0.1


def test_min_classes_above_k_rejected(binary):
    with pytest.raises(ValueError):
        fit_lcen(binary, LcenConfig(**SMALL, min_classes_selected=3))


# pipeline ------------------------------------------------------------------

def test_final_mask_within_union(lcen3):
    m = lcen3
    assert m.per_class_masks.shape == (3, m.transform.n_columns)
    assert (m.final_mask <= m.per_class_masks.any(axis=0)).all()
    assert (m.per_class_masks.sum(axis=0)[m.final_mask] >= m.config.min_classes_selected).all()


def test_selected_raw_features_resolve(lcen3, three_class):
    raw = selected_raw_features(lcen3)
    assert len(raw) <= three_class.n_features
    parents = {p for c in lcen3.selected_columns for p in lcen3.parent_map[c]}
    assert set(raw) == parents
    names = selected_raw_features(lcen3, feature_names=three_class.feature_names)
    assert names == [three_class.feature_names[i] for i in raw]


def test_feature_importance_sorted(lcen3):
    imp = [v for _, v in lcen3.feature_importance]
    assert imp == sorted(imp, reverse=True)
    assert sorted(c for c, _ in lcen3.feature_importance) == lcen3.selected_columns.tolist()


def test_harmonize_stricter_never_adds(three_class, lcen3):
    m3 = fit_lcen(three_class, LcenConfig(**SMALL, min_classes_selected=3))
    # same stage 1, so the clipped masks agree for any cutoff
    assert m3.chosen["degree"] == lcen3.chosen["degree"]
    for c in SMALL["cutoffs"]:
        masks = clip_step(lcen3.stage1_fit, c)
        assert (harmonize(masks, 3) <= harmonize(masks, 1)).all()
    assert (m3.final_mask <= m3.per_class_masks.all(axis=0)).all()


def test_deterministic(three_class, lcen3):
    again = fit_lcen(three_class, LcenConfig(**SMALL))
    assert again.chosen == lcen3.chosen
    assert np.array_equal(again.final_fit.W, lcen3.final_fit.W)


def test_len_equals_lcen_with_zero_cutoff(three_class):
    a = fit_lcen(three_class, LcenConfig(**SMALL, variant="LEN"))
    b = fit_lcen(three_class, LcenConfig(**{**SMALL, "cutoffs": (0.0,)}))
    assert a.chosen == b.chosen
    assert np.array_equal(a.final_mask, b.final_mask)
    assert np.array_equal(a.final_fit.W, b.final_fit.W)


def test_lc_refits_with_stage1_lasso(three_class):
    m = fit_lcen(three_class, LcenConfig(**SMALL, variant="LC"))
    ch = m.chosen
    assert ch["stage1_l1_ratio"] == 1.0
    assert (ch["alpha"], ch["l1_ratio"]) == (ch["stage1_alpha"], ch["stage1_l1_ratio"])


def test_lcl_refit_is_lasso(three_class):
    m = fit_lcen(three_class, LcenConfig(**SMALL, variant="LCL"))
    assert m.chosen["l1_ratio"] == 1.0 and m.chosen["stage1_l1_ratio"] == 1.0


def test_binary_uses_single_mask(binary):
    m = fit_lcen(binary, LcenConfig(**SMALL, min_classes_selected=1))
    assert m.final_fit.mode == "binary"
    assert m.per_class_masks.shape[0] == 1
    assert np.array_equal(m.final_mask, m.per_class_masks[0])


def test_rescaling_raw_features_changes_nothing(binary):
    cfg = LcenConfig(**{**SMALL, "degrees": (1,)})
    a = fit_lcen(binary, cfg)
    scaled = replace(binary, X=binary.X * np.array([3.0, 0.5, 10.0, 1.0, 7.0]) + 2.0)
    b = fit_lcen(scaled, cfg)
    assert np.array_equal(a.final_mask, b.final_mask)
    assert np.allclose(a.predict_proba(binary.X), b.predict_proba(scaled.X), atol=1e-6)


def test_no_features_fallback():
    rng = np.random.default_rng(0)
    ds = Dataset("noise", rng.normal(size=(60, 3)), rng.integers(0, 2, 60), ("a", "b", "c"), ("n", "p"))
    m = fit_lcen(ds, LcenConfig(degrees=(1,), cutoffs=(0.1,), alphas=(1.0,), l1_ratios=(0.5,), cv_folds=3))
    assert m.no_features_selected
    assert selected_raw_features(m) == []
    pred = m.predict(ds.X)
    assert len(set(pred.tolist())) == 1
    assert "no features selected" in model_report(m)


def test_parent_resolution_of_interaction(three_class, lcen3):
    design = expand_features(three_class.X[:, :3], 2)
    col = design.terms.index((0, 2))
    fit = LogisticFit(np.ones((3, 1)), np.zeros(3), Penalty(), "one_vs_rest", 3, True, 1, 0.0)
    mask = np.zeros(design.n_columns, dtype=bool)
    mask[col] = True
    m = replace(lcen3, final_mask=mask, final_fit=fit)
    assert selected_raw_features(m, design) == [0, 2]


_TERM = re.compile(r"([+-][0-9.e+-]+)\*z\(([^)]*)\)")


def test_report_reproduces_logits(three_class, lcen3):
    names = list(three_class.feature_names)
    text = model_report(lcen3, names)
    logit_lines = [ln for ln in text.splitlines() if ln.startswith("logit[")]
    assert len(logit_lines) == 3
    Zfull = lcen3.transform(three_class.X)
    col_of = {n: i for i, n in enumerate(lcen3.column_names(names))}
    want = decision_function(lcen3.final_fit, lcen3.design(three_class.X))
    for k, ln in enumerate(logit_lines):
        rhs = ln.split(" = ", 1)[1]
        got = np.full(len(Zfull), float(rhs.split()[0]))
        for coef, name in _TERM.findall(rhs):
            got += float(coef) * Zfull[:, col_of[name]]
        assert np.allclose(got, want[:, k], rtol=1e-4, atol=1e-4)


# plain penalized baselines ---------------------------------------------------

def test_single_cell_skips_cv(binary):
    m = fit_penalized_cv(binary, (0.0,), (0.0,))
    assert m.cv == [] and m.chosen["alpha"] == 0.0
    Z = m.transform(binary.X)
    direct = fit_logistic(Z, binary.y, Penalty(0.0, 0.0))
    assert np.allclose(m.fit.W, direct.W) and np.allclose(m.fit.b, direct.b)


def test_penalized_cv_picks_grid_cell(three_class):
    m = fit_penalized_cv(three_class, (0.5, 1.0), (0.003, 0.03, 0.3), cv_folds=3)
    assert len(m.cv) == 6
    assert (m.chosen["l1_ratio"], m.chosen["alpha"]) in {(c.l1_ratio, c.alpha) for c in m.cv}
    best = max(c.f1 for c in m.cv)
    pick = next(c for c in m.cv if (c.l1_ratio, c.alpha) == (m.chosen["l1_ratio"], m.chosen["alpha"]))
    assert pick.f1 == best
    assert m.predict_proba(three_class.X).shape == (150, 3)


def test_model_is_dataclass_with_timings(lcen3):
    assert isinstance(lcen3, LcenModel)
    assert set(lcen3.timings) == {"stage1", "stage2", "total"}
