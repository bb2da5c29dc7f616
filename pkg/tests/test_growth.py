import math

import numpy as np
import pytest

from embodykit.errors import InvalidInputError
from embodykit.growth import (
    B_MIN,
    BodySpec,
    GeomPrimitive,
    GrowthCurve,
    MeasurementSamples,
    body_spec_from_json,
    body_spec_to_json,
    build_body_spec,
    eval_curve,
    fit_log_curve,
    geom_volume,
    load_body_template,
    load_measurement_csv,
)
from embodykit.paths import default_curves, default_template_path


def grid_search_fit(ages, values, b_lo=0.1, b_hi=10.0, b_step=1e-3):
    """Independent oracle: dense b grid, (a, c) from linear least squares."""
    best = (None, math.inf)
    ages = np.asarray(ages, float)
    values = np.asarray(values, float)
    for b in np.arange(b_lo, b_hi + b_step, b_step):
        t = np.log(ages + b)
        A = np.stack([t, np.ones_like(t)], axis=1)
        coef, *_ = np.linalg.lstsq(A, values, rcond=None)
        r = float(np.sum((A @ coef - values) ** 2))
        if r < best[1]:
            best = ((coef[0], b, coef[1]), r)
    return best


def curve_residual(curve, ages, values):
    return sum((eval_curve(curve, x) - y) ** 2 for x, y in zip(ages, values))


class TestFitLogCurve:
    def test_constant_data_ties_to_lower_bound(self):
        s = MeasurementSamples("flat", (1.0, 6.0, 24.0), (40.0, 40.0, 40.0))
        c = fit_log_curve(s)
        assert c.a == 0.0
        assert c.b == B_MIN
        assert c.c == 40.0

    def test_exact_roundtrip(self):
        truth = GrowthCurve(2.0, 0.5, 40.0)
        ages = (0.0, 1.0, 3.0, 6.0, 12.0, 24.0)
        values = tuple(eval_curve(truth, x) for x in ages)
        c = fit_log_curve(MeasurementSamples("gen", ages, values))
        assert c.a == pytest.approx(2.0, abs=1e-6)
        assert c.b == pytest.approx(0.5, abs=1e-6)
        assert c.c == pytest.approx(40.0, abs=1e-6)
        assert curve_residual(c, ages, values) <= 1e-12

    def test_beats_grid_oracle_on_noisy_data(self):
        rng = np.random.default_rng(7)
        truth = GrowthCurve(5.0, 1.3, 30.0)
        ages = (0.0, 2.0, 4.0, 8.0, 16.0, 24.0)
        values = tuple(eval_curve(truth, x) + e
                       for x, e in zip(ages, rng.normal(0, 0.3, len(ages))))
        fit = fit_log_curve(MeasurementSamples("noisy", ages, values))
        _, oracle_rss = grid_search_fit(ages, values)
        assert curve_residual(fit, ages, values) <= oracle_rss + 1e-9

    def test_too_few_samples_rejected(self):
        with pytest.raises(InvalidInputError):
            MeasurementSamples("short", (0.0, 1.0), (1.0, 2.0))

    def test_nonfinite_sample_rejected(self):
        with pytest.raises(InvalidInputError):
            MeasurementSamples("bad", (0.0, 1.0, 2.0), (1.0, math.nan, 2.0))

    def test_deterministic(self):
        s = MeasurementSamples("d", (0.0, 3.0, 9.0, 24.0), (3.0, 6.0, 9.0, 12.0))
        assert fit_log_curve(s) == fit_log_curve(s)


class TestEvalCurve:
    def test_constant_curve(self):
        c = GrowthCurve(0.0, 1.0, 37.0)
        for age in (0.0, 5.5, 24.0):
            assert eval_curve(c, age) == 37.0

    def test_closed_form(self):
        c = GrowthCurve(2.0, 0.5, 40.0)
        assert eval_curve(c, 1.0) == pytest.approx(40.0 + 2.0 * math.log(1.5), abs=1e-12)

    def test_default_head_circumference_endpoints(self):
        curves = default_curves()
        c = curves["head_circumference"]
        assert eval_curve(c, 0.0) == pytest.approx(35.0, abs=2.0)
        assert eval_curve(c, 24.0) == pytest.approx(48.0, abs=2.0)

    def test_b_constraint_enforced(self):
        with pytest.raises(InvalidInputError):
            GrowthCurve(1.0, 0.05, 0.0)


class TestGeomVolume:
    def test_unit_sphere(self):
        assert geom_volume(GeomPrimitive("sphere", (1.0,))) == pytest.approx(
            4.18879, abs=1e-5)

    def test_degenerate_capsule_equals_sphere(self):
        cap = geom_volume(GeomPrimitive("capsule", (1.0, 0.0)))
        sph = geom_volume(GeomPrimitive("sphere", (1.0,)))
        assert cap == pytest.approx(sph, rel=1e-12)

    def test_unit_box(self):
        assert geom_volume(GeomPrimitive("box", (0.5, 0.5, 0.5))) == 1.0


@pytest.fixture(scope="module")
def template():
    return load_body_template(default_template_path())


@pytest.fixture(scope="module")
def curves():
    return default_curves()


class TestBuildBodySpec:
    def test_calibration_age_is_identity(self, template, curves):
        out = build_body_spec(template, 18.0, curves)
        for a, b in zip(template.root.walk(), out.root.walk()):
            assert a.name == b.name
            np.testing.assert_allclose(b.geom.dims, a.geom.dims, rtol=1e-12)
            assert b.mass == pytest.approx(a.mass, rel=1e-12)

    @pytest.mark.parametrize("age", [0.0, 3.0, 6.0, 12.0, 18.0, 24.0])
    def test_mass_ratio_equals_volume_ratio(self, template, curves, age):
        out = build_body_spec(template, age, curves)
        tpl_parts = template.parts()
        for part in out.root.walk():
            tpl = tpl_parts[part.name]
            vol_ratio = geom_volume(part.geom) / geom_volume(tpl.geom)
            assert part.mass / tpl.mass == pytest.approx(vol_ratio, rel=1e-12)

    @pytest.mark.parametrize("age", [0.0, 3.0, 6.0, 12.0, 18.0, 24.0])
    def test_gear_ratio_equals_volume_ratio(self, template, curves, age):
        out = build_body_spec(template, age, curves)
        tpl_parts = template.parts()
        for part in out.root.walk():
            tpl = tpl_parts[part.name]
            vol_ratio = geom_volume(part.geom) / geom_volume(tpl.geom)
            for j_out, j_tpl in zip(part.joints, tpl.joints):
                assert j_out.gear / j_tpl.gear == pytest.approx(vol_ratio, rel=1e-12)

    def test_total_mass_endpoints(self, template, curves):
        birth = build_body_spec(template, 0.0, curves).total_mass()
        two_years = build_body_spec(template, 24.0, curves).total_mass()
        assert birth == pytest.approx(3.3, abs=1.5)
        assert two_years == pytest.approx(12.0, abs=1.5)

    def test_age_out_of_range(self, template, curves):
        with pytest.raises(InvalidInputError):
            build_body_spec(template, 25.0, curves)

    def test_unknown_override_part(self, template, curves):
        with pytest.raises(InvalidInputError):
            build_body_spec(template, 6.0, curves, overrides={"nose": (0.01,)})

    def test_override_recomputes_mass_and_gear(self, template, curves):
        plain = build_body_spec(template, 6.0, curves)
        new_dims = (0.1,)
        out = build_body_spec(template, 6.0, curves, overrides={"head": new_dims})
        head_tpl = template.parts()["head"]
        head_out = out.parts()["head"]
        assert head_out.geom.dims == new_dims
        vol_ratio = geom_volume(head_out.geom) / geom_volume(head_tpl.geom)
        assert head_out.mass == pytest.approx(head_tpl.mass * vol_ratio, rel=1e-12)
        assert head_out.joints[0].gear == pytest.approx(
            head_tpl.joints[0].gear * vol_ratio, rel=1e-12)
        assert plain.parts()["head"].geom.dims != new_dims

    def test_serialization_roundtrip_and_determinism(self, template, curves):
        a = build_body_spec(template, 7.5, curves)
        b = build_body_spec(template, 7.5, curves)
        ja, jb = body_spec_to_json(a), body_spec_to_json(b)
        assert ja == jb
        back = body_spec_from_json(ja)
        assert body_spec_to_json(back) == ja

    def test_monotone_default_curves(self, curves):
        grid = np.arange(0.0, 24.0 + 1e-9, 0.1)
        for curve in curves.values():
            if curve.a > 0:
                vals = [eval_curve(curve, x) for x in grid]
                assert all(b > a for a, b in zip(vals, vals[1:]))


def test_measurement_csv_roundtrip(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("age_months,value\n0,10.0\n6,12.5\n24,15.0\n")
    s = load_measurement_csv(p)
    assert s.name == "m"
    assert s.ages == (0.0, 6.0, 24.0)
    assert s.values == (10.0, 12.5, 15.0)
    with pytest.raises(InvalidInputError):
        bad = tmp_path / "bad.csv"
        bad.write_text("age,val\n0,1\n")
        load_measurement_csv(bad)
