import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lcenclf.dataprep import BANK_COLUMNS, HEART_FAILURE_COLUMNS

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA_DIR = Path(__file__).resolve().parents[1] / "data"

# Level sets of the published Bank Marketing file.
BANK_LEVELS = {
    "job": ["admin.", "blue-collar", "entrepreneur", "housemaid", "management", "retired",
            "self-employed", "services", "student", "technician", "unemployed", "unknown"],
    "marital": ["divorced", "married", "single", "unknown"],
    "education": ["basic.4y", "basic.6y", "basic.9y", "high.school", "illiterate",
                  "professional.course", "university.degree", "unknown"],
    "default": ["no", "unknown", "yes"],
    "housing": ["no", "unknown", "yes"],
    "loan": ["no", "unknown", "yes"],
    "contact": ["cellular", "telephone"],
    "month": ["apr", "aug", "dec", "jul", "jun", "mar", "may", "nov", "oct", "sep"],
    "day_of_week": ["fri", "mon", "thu", "tue", "wed"],
    "poutcome": ["failure", "nonexistent", "success"],
}


def heart_csv(n=40, seed=0):
    """Schema-faithful Heart Failure table with random values."""
    rng = np.random.default_rng(seed)
    lines = [",".join(HEART_FAILURE_COLUMNS)]
    for i in range(n):
        row = [rng.integers(40, 95), rng.integers(0, 2), rng.integers(20, 8000), rng.integers(0, 2),
               rng.integers(14, 80), rng.integers(0, 2), round(rng.uniform(25e3, 8e5), 2),
               round(rng.uniform(0.5, 9.4), 2), rng.integers(113, 148), rng.integers(0, 2),
               rng.integers(0, 2), rng.integers(4, 285), i % 2]
        lines.append(",".join(str(v) for v in row))
    return "\n".join(lines) + "\n"


def bank_csv(n=60, seed=0):
    """Schema-faithful Bank Marketing table (semicolon, quoted strings) covering every level."""
    rng = np.random.default_rng(seed)
    lines = [";".join(f'"{c}"' for c in BANK_COLUMNS)]
    for i in range(n):
        row = []
        for c in BANK_COLUMNS:
            if c in BANK_LEVELS:
                lv = BANK_LEVELS[c]
                row.append(f'"{lv[i % len(lv)]}"')
            elif c == "y":
                row.append('"yes"' if i % 3 == 0 else '"no"')
            else:
                row.append(str(round(float(rng.normal(10, 3)), 3)))
        lines.append(";".join(row))
    return "\n".join(lines) + "\n"


def have_data(name):
    from lcenclf.dataprep import read_manifest
    try:
        return (DATA_DIR / read_manifest(DATA_DIR)[name]).exists()
    except (OSError, KeyError):
        return False


@pytest.fixture(scope="session")
def glass():
    from lcenclf.dataprep import load_from_dir
    return load_from_dir("glass", DATA_DIR)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = next((m for name, m in list(sys.modules.items()) if name.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
