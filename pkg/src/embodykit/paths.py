"""Access to the bundled default data files.

The bundled growth tables are small desk-scale defaults whose endpoints
were read off published infant-growth charts; replace them with real
anthropometric tables for quantitative work. The acuity table is a
placeholder with a plausible developmental profile.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .growth import GrowthCurve, fit_log_curve, load_measurement_csv

DEFAULT_MEASUREMENTS = ("height", "head_circumference")


def data_dir() -> Path:
    return Path(resources.files("embodykit") / "data")


def default_template_path() -> Path:
    return data_dir() / "body_template.json"


def default_table_path(measurement: str) -> Path:
    return data_dir() / f"{measurement}.csv"


def default_acuity_path() -> Path:
    return data_dir() / "acuity.csv"


def default_test_image_path() -> Path:
    return data_dir() / "test_pattern.ppm"


def default_curves(tables_dir: Path | None = None) -> dict[str, GrowthCurve]:
    """Fit growth curves for every measurement table in a directory."""
    base = Path(tables_dir) if tables_dir is not None else data_dir()
    curves = {}
    for path in sorted(base.glob("*.csv")):
        if path.stem == "acuity":
            continue
        curves[path.stem] = fit_log_curve(load_measurement_csv(path, path.stem))
    return curves
