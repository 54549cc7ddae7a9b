"""Polynomial feature expansion.

Columns are every monomial of the raw features with total degree between 1
and ``degree``, ordered first by degree and then lexicographically by the
sorted index tuple. No constant column is emitted.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ExpandedDesign:
    Z: np.ndarray
    names: tuple[str, ...]
    degree: int
    lag: int
    terms: tuple[tuple[int, ...], ...]   # raw index multiset per column

    @property
    def parent_map(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(sorted(set(t))) for t in self.terms)

    @property
    def n_columns(self) -> int:
        return len(self.terms)

    def labels(self, feature_names: Sequence[str]) -> list[str]:
        """Derivation strings with raw feature names substituted for ``x<i>``."""
        return [term_name(t, feature_names) for t in self.terms]


def n_expanded(d: int, degree: int) -> int:
    return comb(d + degree, degree) - 1


def monomial_terms(d: int, degree: int) -> list[tuple[int, ...]]:
    terms = []
    for deg in range(1, degree + 1):
        terms.extend(combinations_with_replacement(range(d), deg))
    return terms


def term_name(term: tuple[int, ...], feature_names: Sequence[str] | None = None) -> str:
    parts = []
    for j in sorted(set(term)):
        base = f"x{j}" if feature_names is None else str(feature_names[j])
        power = term.count(j)
        parts.append(base if power == 1 else f"{base}^{power}")
    return "*".join(parts)


_FACTOR = re.compile(r"^x(\d+)(?:\^(\d+))?$")


def parse_derivation(name: str) -> dict[int, int]:
    """Inverse of :func:`term_name` for ``x<i>`` strings: raw index -> power."""
    powers: dict[int, int] = {}
    for factor in name.split("*"):
        m = _FACTOR.match(factor)
        if m is None:
            raise ValueError(f"cannot parse factor {factor!r} in {name!r}")
        j, p = int(m.group(1)), int(m.group(2) or 1)
        powers[j] = powers.get(j, 0) + p
    return powers


def evaluate_term(terms: Sequence[tuple[int, ...]], X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    out = np.empty((X.shape[0], len(terms)))
    for c, t in enumerate(terms):
        col = X[:, t[0]].copy()
        for j in t[1:]:
            col *= X[:, j]
        out[:, c] = col
    return out


def expand_features(X: np.ndarray, degree: int, lag: int = 0) -> ExpandedDesign:
    if degree not in (1, 2, 3):
        raise ValueError(f"degree must be 1, 2 or 3, got {degree}")
    if lag != 0:
        raise ValueError("lagged expansion is unsupported in this artifact (lag must be 0)")
    X = np.asarray(X, dtype=float)
    terms = monomial_terms(X.shape[1], degree)
    Z = evaluate_term(terms, X)
    return ExpandedDesign(Z, tuple(term_name(t) for t in terms), degree, lag, tuple(terms))
