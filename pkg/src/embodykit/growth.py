"""Age-parameterized body growth.

Fits logarithmic growth curves to anthropometric measurement tables and
instantiates an age-specific body specification from an 18-month template.
Masses follow part volume at constant density, and actuator gears follow
the volume of the actuating body part.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

B_MIN = 0.1
AGE_MIN = 0.0
AGE_MAX = 24.0
TEMPLATE_AGE = 18.0


def _check_age(age: float) -> float:
    age = float(age)
    if not math.isfinite(age) or not (AGE_MIN <= age <= AGE_MAX):
        raise InvalidInputError(f"age must be in [{AGE_MIN}, {AGE_MAX}] months, got {age}")
    return age


@dataclass(frozen=True)
class GrowthCurve:
    """Parameters of the growth law value = a * ln(age + b) + c."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.a, self.b, self.c)):
            raise InvalidInputError("curve parameters must be finite")
        if self.b < B_MIN:
            raise InvalidInputError(f"b must be >= {B_MIN}, got {self.b}")


@dataclass(frozen=True)
class MeasurementSamples:
    """Mean measurement values (cm or kg) at increasing ages in months."""

    name: str
    ages: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.ages) < 3:
            raise InvalidInputError(f"{self.name}: need at least 3 sample points")
        if len(self.ages) != len(self.values):
            raise InvalidInputError(f"{self.name}: ages and values length mismatch")
        a = np.asarray(self.ages, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(v))):
            raise InvalidInputError(f"{self.name}: non-finite sample")
        if np.any(np.diff(a) <= 0):
            raise InvalidInputError(f"{self.name}: ages must be strictly increasing")
        if np.any(v <= 0):
            raise InvalidInputError(f"{self.name}: values must be positive")
        for x in a:
            _check_age(x)


def eval_curve(curve: GrowthCurve, age: float) -> float:
    """Evaluate a * ln(age + b) + c."""
    return curve.a * math.log(age + curve.b) + curve.c


def _profile_fit(ages: np.ndarray, values: np.ndarray, b: np.ndarray):
    """For each candidate b, solve the (a, c) linear least squares in closed
    form and return (a, c, residual sum of squares) arrays."""
    t = np.log(ages[None, :] + b[:, None])  # (B, n)
    tbar = t.mean(axis=1)
    ybar = values.mean()
    dt = t - tbar[:, None]
    dy = values - ybar
    var = np.einsum("bi,bi->b", dt, dt)
    cov = dt @ dy
    a = np.where(var > 0, cov / np.where(var > 0, var, 1.0), 0.0)
    c = ybar - a * tbar
    err = dy[None, :] - a[:, None] * dt
    resid = np.einsum("bi,bi->b", err, err)
    return a, c, resid


def fit_log_curve(samples: MeasurementSamples) -> GrowthCurve:
    """Least-squares fit of value = a * ln(age + b) + c with b >= 0.1.

    The constraint is profiled: for fixed b the (a, c) solve is linear, so
    b is scanned densely over [0.1, 50] and refined by golden-section
    search to 1e-9. Deterministic; constant data ties break to b = 0.1.
    """
    ages = np.asarray(samples.ages, dtype=float)
    values = np.asarray(samples.values, dtype=float)

    if np.ptp(values) == 0.0:
        return GrowthCurve(0.0, B_MIN, float(values[0]))

    def rss(b: float) -> float:
        _, _, r = _profile_fit(ages, values, np.array([b]))
        return float(r[0])

    grid = np.arange(B_MIN, 50.0 + 5e-4, 5e-4)
    _, _, resid = _profile_fit(ages, values, grid)
    k = int(np.argmin(resid))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]

    # golden-section refinement of the profiled residual
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = rss(x1), rss(x2)
    while hi - lo > 1e-9:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = rss(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = rss(x2)
    b = max(B_MIN, 0.5 * (lo + hi))
    a_arr, c_arr, _ = _profile_fit(ages, values, np.array([b]))
    return GrowthCurve(float(a_arr[0]), float(b), float(c_arr[0]))


def load_measurement_csv(path, name: str | None = None) -> MeasurementSamples:
    """Read a growth table CSV with header `age_months,value`."""
    ages, values = [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or reader.fieldnames[:2] != ["age_months", "value"]:
            raise InvalidInputError(f"{path}: expected header age_months,value")
        for row in reader:
            ages.append(float(row["age_months"]))
            values.append(float(row["value"]))
    if name is None:
        import os

        name = os.path.splitext(os.path.basename(str(path)))[0]
    return MeasurementSamples(name=name, ages=tuple(ages), values=tuple(values))


# ---------------------------------------------------------------------------
# body specification


@dataclass(frozen=True)
class GeomPrimitive:
    """Primitive geometry. dims: sphere (r), capsule (r, half_length),
    box (hx, hy, hz); all meters."""

    kind: str
    dims: tuple[float, ...]

    _NDIMS = {"sphere": 1, "capsule": 2, "box": 3}

    def __post_init__(self):
        if self.kind not in self._NDIMS:
            raise InvalidInputError(f"unknown geom kind {self.kind!r}")
        if len(self.dims) != self._NDIMS[self.kind]:
            raise InvalidInputError(f"{self.kind} expects {self._NDIMS[self.kind]} dims")
        if any((not math.isfinite(d)) or d < 0 for d in self.dims):
            raise InvalidInputError("geom dims must be finite and nonnegative")
        if self.kind != "capsule" and any(d <= 0 for d in self.dims):
            raise InvalidInputError("geom dims must be positive")
        if self.kind == "capsule" and self.dims[0] <= 0:
            raise InvalidInputError("capsule radius must be positive")


def geom_volume(geom: GeomPrimitive) -> float:
    """Volume in m^3 of a primitive geometry."""
    if geom.kind == "sphere":
        (r,) = geom.dims
        return 4.0 / 3.0 * math.pi * r**3
    if geom.kind == "capsule":
        r, hl = geom.dims
        return math.pi * r * r * (2.0 * hl) + 4.0 / 3.0 * math.pi * r**3
    hx, hy, hz = geom.dims
    return 8.0 * hx * hy * hz


@dataclass(frozen=True)
class Joint:
    """Hinge joint actuating the body part that carries it."""

    axis: tuple[float, float, float]
    range: tuple[float, float]
    gear: float

    def __post_init__(self):
        ax = np.asarray(self.axis, dtype=float)
        if abs(float(np.linalg.norm(ax)) - 1.0) > 1e-9:
            raise InvalidInputError("joint axis must be unit length")
        lo, hi = self.range
        if not lo < hi:
            raise InvalidInputError("joint range must satisfy lo < hi")
        if self.gear < 0:
            raise InvalidInputError("gear must be nonnegative")


@dataclass
class BodyPart:
    """One node of the body tree.

    `governing` names the measurement driving each geom dimension; offsets
    of children are rescaled with the parent's per-axis governing factors.
    """

    name: str
    geom: GeomPrimitive
    offset: tuple[float, float, float]
    mass: float
    joints: tuple[Joint, ...] = ()
    children: tuple["BodyPart", ...] = ()
    governing: tuple[str, ...] = ()

    def __post_init__(self):
        if self.mass <= 0:
            raise InvalidInputError(f"{self.name}: mass must be positive")
        if self.governing and len(self.governing) != len(self.geom.dims):
            raise InvalidInputError(f"{self.name}: one governing measurement per dim")

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass
class BodySpec:
    """Body tree instantiated at a given age; template calibrated at 18 months."""

    root: BodyPart
    age: float
    template_age: float = TEMPLATE_AGE

    def __post_init__(self):
        _check_age(self.age)
        names = [p.name for p in self.root.walk()]
        if len(names) != len(set(names)):
            raise InvalidInputError("body part names must be unique")

    def parts(self) -> dict[str, BodyPart]:
        return {p.name: p for p in self.root.walk()}

    def total_mass(self) -> float:
        return sum(p.mass for p in self.root.walk())


def _axis_factor(parent: BodyPart, axis: int, factors: dict[str, float]) -> float:
    """Per-axis offset scale: the parent's governing measurement for that
    axis (per-dim for boxes, else the part's single governing measurement)."""
    gov = parent.governing
    if not gov:
        return 1.0
    name = gov[axis] if len(gov) == 3 else gov[0]
    return factors[name]


def _scale_part(part: BodyPart, parent: BodyPart | None, factors: dict[str, float],
                overrides: dict[str, tuple[float, ...]]) -> BodyPart:
    if part.governing:
        dims = tuple(d * factors[m] for d, m in zip(part.geom.dims, part.governing))
    else:
        dims = part.geom.dims
    if part.name in overrides:
        new = tuple(float(v) for v in overrides[part.name])
        if len(new) != len(part.geom.dims):
            raise InvalidInputError(f"override for {part.name}: wrong number of dims")
        dims = new
    geom = GeomPrimitive(part.geom.kind, dims)
    vol_ratio = geom_volume(geom) / geom_volume(part.geom)
    if parent is None:
        offset = part.offset
    else:
        offset = tuple(part.offset[i] * _axis_factor(parent, i, factors) for i in range(3))
    joints = tuple(Joint(j.axis, j.range, j.gear * vol_ratio) for j in part.joints)
    children = tuple(_scale_part(ch, part, factors, overrides) for ch in part.children)
    return BodyPart(
        name=part.name,
        geom=geom,
        offset=offset,
        mass=part.mass * vol_ratio,
        joints=joints,
        children=children,
        governing=part.governing,
    )


def build_body_spec(template: BodySpec, age: float,
                    curves: dict[str, GrowthCurve],
                    overrides: dict[str, tuple[float, ...]] | None = None) -> BodySpec:
    """Instantiate the template at a target age.

    Geom dimensions rescale by the governing curve's value ratio between the
    target age and the calibration age; offsets follow the parent's per-axis
    factors; mass scales with part volume (constant density); each gear
    scales with the volume of its actuating part. Overrides replace dims
    last, with mass and gear recomputed from the overridden volume.
    """
    age = _check_age(age)
    overrides = dict(overrides or {})
    known = {p.name for p in template.root.walk()}
    for name in overrides:
        if name not in known:
            raise InvalidInputError(f"override names unknown part {name!r}")
    needed = {m for p in template.root.walk() for m in p.governing}
    missing = needed - set(curves)
    if missing:
        raise InvalidInputError(f"curves missing measurements: {sorted(missing)}")
    factors = {
        m: eval_curve(curves[m], age) / eval_curve(curves[m], template.template_age)
        for m in needed
    }
    root = _scale_part(template.root, None, factors, overrides)
    return BodySpec(root=root, age=age, template_age=template.template_age)


# ---------------------------------------------------------------------------
# serialization (fixed field order for bit-exact reproducibility)


def _part_to_dict(part: BodyPart) -> dict:
    d = {
        "name": part.name,
        "kind": part.geom.kind,
        "dims": list(part.geom.dims),
        "offset": list(part.offset),
        "mass": part.mass,
        "joints": [
            {"axis": list(j.axis), "range": list(j.range), "gear": j.gear}
            for j in part.joints
        ],
        "children": [_part_to_dict(ch) for ch in part.children],
    }
    if part.governing:
        d["governing_measurement"] = list(part.governing)
    return d


def body_spec_to_json(spec: BodySpec) -> str:
    doc = {
        "age": spec.age,
        "template_age": spec.template_age,
        "parts": [_part_to_dict(spec.root)],
    }
    return json.dumps(doc, indent=2) + "\n"


def _part_from_dict(d: dict) -> BodyPart:
    return BodyPart(
        name=d["name"],
        geom=GeomPrimitive(d["kind"], tuple(float(x) for x in d["dims"])),
        offset=tuple(float(x) for x in d["offset"]),
        mass=float(d["mass"]),
        joints=tuple(
            Joint(tuple(float(x) for x in j["axis"]),
                  (float(j["range"][0]), float(j["range"][1])),
                  float(j["gear"]))
            for j in d.get("joints", [])
        ),
        children=tuple(_part_from_dict(ch) for ch in d.get("children", [])),
        governing=tuple(d.get("governing_measurement", ())),
    )


def body_spec_from_json(text: str) -> BodySpec:
    doc = json.loads(text)
    parts = doc["parts"]
    if len(parts) != 1:
        raise InvalidInputError("body spec must have exactly one root part")
    return BodySpec(
        root=_part_from_dict(parts[0]),
        age=float(doc["age"]),
        template_age=float(doc.get("template_age", TEMPLATE_AGE)),
    )


def load_body_template(path) -> BodySpec:
    with open(path, "r", encoding="utf-8") as fh:
        return body_spec_from_json(fh.read())
