"""Command-line experiment harness.

Grammar::

    embodykit <grow|growth-curves|strength-test|reach-demo|delay-demo|
               vision-demo|scene> [--config PATH] [--seed N] [--out DIR]
               [flag overrides]

Every subcommand is deterministic given (config, seed); re-running
produces byte-identical artifacts. All numeric CSV output uses full
round-trip decimal formatting (``repr``). Exit codes: 0 success,
2 config error, 3 I/O error, 4 numerical failure.

The environment variable ``EMBODYKIT_SEED`` provides a default seed,
overridden by ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import report
from .delays import DelayConfig
from .errors import ConfigError, EmbodykitError, InvalidInputError
from .experiments import (
    DEFAULT_GAIN_SET,
    GAIN_SETS,
    REACH_STEPS,
    TIMESTEP_S,
    ReachTrace,
    reach_chain,
    run_growth_curves,
    run_reach_set,
    run_strength_test,
    run_vision_pipeline,
    sample_targets,
)
from .growth import body_spec_to_json, build_body_spec, load_body_template
from .paths import (
    default_acuity_path,
    default_curves,
    default_template_path,
    default_test_image_path,
)
from .scenegen import SceneConfig, generate_scene, scene_to_json
from .vision import (
    FoveationParams,
    ImageBuffer,
    acuity_for_age,
    load_acuity_csv,
    read_pnm,
    write_pnm,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4

DEFAULT_STRENGTH_AGES = (0.0, 6.0, 12.0, 18.0, 24.0)
DEFAULT_DELAYS = (0, 10, 40)
REACH_AGE = 18.0
REACH_TARGET_COUNT = 10


# ---------------------------------------------------------------------------
# small helpers


def _fmt(v) -> str:
    """Full round-trip decimal formatting for one number."""
    return repr(float(v))


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(c if isinstance(c, str) else _fmt(c) for c in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_ages(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad ages list {text!r}") from exc


def _load_config(path, allowed: set[str]) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: invalid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path}: expected a JSON object")
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"config {path}: unknown keys {sorted(unknown)}")
    return cfg


def _setting(args, cfg: dict, key: str, default):
    """Flag override beats config file beats default."""
    flag = getattr(args, key.replace("-", "_"), None)
    if flag is not None:
        return flag
    if key in cfg:
        return cfg[key]
    return default


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("EMBODYKIT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"EMBODYKIT_SEED must be an integer, got {env!r}") from exc
    return 0


def _template_and_curves(args, cfg):
    template_path = _setting(args, cfg, "template", default_template_path())
    tables_dir = _setting(args, cfg, "tables", None)
    template = load_body_template(template_path)
    curves = default_curves(tables_dir)
    return template, curves


# ---------------------------------------------------------------------------
# subcommands


def _cmd_grow(args) -> int:
    cfg = _load_config(args.config, {"age", "template", "tables"})
    age = float(_setting(args, cfg, "age", 18.0))
    template, curves = _template_and_curves(args, cfg)
    spec = build_body_spec(template, age, curves)
    out = _out_dir(args) / f"body_spec_age_{_fmt(age)}.json"
    out.write_text(body_spec_to_json(spec), encoding="utf-8")
    print(out)
    return EXIT_OK


def _cmd_growth_curves(args) -> int:
    cfg = _load_config(args.config, {"ages", "template", "tables"})
    ages_text = _setting(args, cfg, "ages", None)
    ages = _parse_ages(ages_text) if isinstance(ages_text, str) else (
        [float(a) for a in ages_text] if ages_text is not None
        else [float(a) for a in range(25)])
    template, curves = _template_and_curves(args, cfg)
    rows = run_growth_curves(ages, curves, template)
    out = _out_dir(args)
    csv_path = out / "growth_curves.csv"
    _write_csv(csv_path,
               ["age_months", "height_cm", "head_circumference_cm", "total_mass_kg"],
               rows)
    arr = np.asarray(rows)
    report.render_panels(
        out / "growth_curves.png", arr[:, 0],
        [("height (cm)", {"height": arr[:, 1]}),
         ("head circ. (cm)", {"head circumference": arr[:, 2]}),
         ("total mass (kg)", {"total mass": arr[:, 3]})],
        xlabel="age (months)", title="growth curves")
    print(csv_path)
    return EXIT_OK


def _cmd_strength_test(args) -> int:
    cfg = _load_config(args.config, {"ages", "behavior", "template", "tables"})
    ages_text = _setting(args, cfg, "ages", None)
    ages = _parse_ages(ages_text) if isinstance(ages_text, str) else (
        [float(a) for a in ages_text] if ages_text is not None
        else list(DEFAULT_STRENGTH_AGES))
    behavior = _setting(args, cfg, "behavior", "both")
    behaviors = ("head_lift", "leg_lift") if behavior == "both" else (behavior,)
    template, curves = _template_and_curves(args, cfg)
    out = _out_dir(args)
    summary = []
    for beh in behaviors:
        angle_series: dict[str, np.ndarray] = {}
        t_s = None
        for age in ages:
            res = run_strength_test(template, curves, age, beh)
            n = res.q.shape[1]
            header = (["t_s"] + [f"q_{i}" for i in range(n)]
                      + [f"qdot_{i}" for i in range(n)])
            rows = np.hstack([res.t_s[:, None], res.q, res.qdot])
            _write_csv(out / f"strength_{beh}_age_{_fmt(age)}.csv", header, rows)
            hit = res.time_to_limit_steps
            summary.append((beh, _fmt(age), "" if hit is None else str(hit)))
            angle_series[f"age {_fmt(age)}"] = res.q[:, res.joint_index]
            t_s = res.t_s
        report.render_line_chart(
            out / f"strength_{beh}.png", t_s, angle_series,
            xlabel="time (s)", ylabel="joint angle (rad)",
            title=f"strength test: {beh}")
    summary_path = out / "strength_summary.csv"
    _write_csv(summary_path,
               ["behavior", "age_months", "time_to_limit_steps"], summary)
    print(summary_path)
    return EXIT_OK


def _trace_rows(trace: ReachTrace) -> np.ndarray:
    steps = len(trace.t_s)
    return np.column_stack([np.arange(1, steps + 1), trace.t_s,
                            trace.distance_m, trace.misalign_deg])


TRACE_HEADER = ["step", "t_s", "distance_m", "misalign_deg"]


def _write_trace_set(out: Path, prefix: str, traces: list[ReachTrace]) -> None:
    for k, trace in enumerate(traces):
        _write_csv(out / f"{prefix}_target_{k}.csv", TRACE_HEADER,
                   _trace_rows(trace))
    mean_rows = np.column_stack([
        np.arange(1, len(traces[0].t_s) + 1),
        traces[0].t_s,
        np.mean([t.distance_m for t in traces], axis=0),
        np.mean([t.misalign_deg for t in traces], axis=0),
    ])
    _write_csv(out / f"{prefix}_mean.csv", TRACE_HEADER, mean_rows)


def _summary_row(label: str, k: int, trace: ReachTrace) -> tuple:
    hit = trace.time_to_target_steps
    return (label, str(k),
            _fmt(trace.distance_m[-1]), _fmt(trace.misalign_deg[-1]),
            "" if hit is None else str(hit), _fmt(trace.tortuosity))


SUMMARY_HEADER = ["run", "target", "final_distance_m", "final_misalign_deg",
                  "time_to_target_steps", "tortuosity"]


def _cmd_reach_demo(args) -> int:
    cfg = _load_config(args.config, {"age", "steps", "template", "tables"})
    age = float(_setting(args, cfg, "age", REACH_AGE))
    steps = int(_setting(args, cfg, "steps", REACH_STEPS))
    template, curves = _template_and_curves(args, cfg)
    chain = reach_chain(template, curves, age)
    targets = sample_targets(chain, _seed(args), REACH_TARGET_COUNT)
    out = _out_dir(args)
    summary = []
    mean_dist_series = {}
    final_state = {"targets": [list(map(float, t)) for t in targets], "gain_sets": {}}
    for g, gains in enumerate(GAIN_SETS):
        traces = run_reach_set(chain, targets, gains, steps=steps)
        _write_trace_set(out, f"reach_gain_{g}", traces)
        for k, trace in enumerate(traces):
            summary.append(_summary_row(f"gain_{g}", k, trace))
        mean_dist_series[f"gain set {g}"] = np.mean(
            [t.distance_m for t in traces], axis=0)
        final_state["gain_sets"][str(g)] = [
            [float(v) for v in t.final_q] for t in traces]
    summary_path = out / "reach_summary.csv"
    _write_csv(summary_path, SUMMARY_HEADER, summary)
    (out / "reach_final_state.json").write_text(
        json.dumps(final_state, indent=2) + "\n", encoding="utf-8")
    report.render_line_chart(
        out / "reach_mean_distance.png", traces[0].t_s, mean_dist_series,
        xlabel="time (s)", ylabel="mean hand-target distance (m)",
        title="reach demo: mean distance across targets")
    print(summary_path)
    return EXIT_OK


def _cmd_delay_demo(args) -> int:
    cfg = _load_config(args.config,
                       {"age", "steps", "delays", "template", "tables"})
    age = float(_setting(args, cfg, "age", REACH_AGE))
    steps = int(_setting(args, cfg, "steps", REACH_STEPS))
    delays_cfg = cfg.get("delays")
    if args.delays is not None:
        sensory_delays = [int(t) for t in args.delays.split(",")]
        motor_delay = 1
    elif delays_cfg is not None:
        dc = DelayConfig.from_dict(delays_cfg)
        if dc.proprioception != dc.vision:
            raise ConfigError("delay demo uses one sensory delay; set "
                              "proprioception and vision equal")
        sensory_delays = [dc.proprioception]
        motor_delay = dc.motor
    else:
        sensory_delays = list(DEFAULT_DELAYS)
        motor_delay = 1
    template, curves = _template_and_curves(args, cfg)
    chain = reach_chain(template, curves, age)
    targets = sample_targets(chain, _seed(args), REACH_TARGET_COUNT)
    gains = GAIN_SETS[DEFAULT_GAIN_SET]
    out = _out_dir(args)
    summary = []
    mean_dist_series = {}
    for d in sensory_delays:
        traces = run_reach_set(chain, targets, gains, steps=steps,
                               sensory_delay=d, motor_delay=motor_delay)
        _write_trace_set(out, f"delay_{d}", traces)
        for k, trace in enumerate(traces):
            summary.append(_summary_row(f"delay_{d}", k, trace))
        mean_dist_series[f"{d * TIMESTEP_S * 1000:.0f} ms"] = np.mean(
            [t.distance_m for t in traces], axis=0)
    summary_path = out / "delay_summary.csv"
    _write_csv(summary_path, SUMMARY_HEADER, summary)
    report.render_line_chart(
        out / "delay_mean_distance.png", traces[0].t_s, mean_dist_series,
        xlabel="time (s)", ylabel="mean hand-target distance (m)",
        title="delay demo: mean distance across targets")
    print(summary_path)
    return EXIT_OK


def _cmd_vision_demo(args) -> int:
    cfg = _load_config(args.config,
                       {"image", "age", "fov", "warp", "out_width",
                        "out_height", "foveation_first", "acuity_table"})
    image_path = Path(_setting(args, cfg, "image", default_test_image_path()))
    age = float(_setting(args, cfg, "age", 12.0))
    fov = _setting(args, cfg, "fov", None)
    warp = float(_setting(args, cfg, "warp", 2.0))
    foveation_first = bool(_setting(args, cfg, "foveation_first", False))
    table_path = _setting(args, cfg, "acuity_table", default_acuity_path())
    try:
        img = read_pnm(image_path)
    except InvalidInputError as exc:
        raise OSError(f"{image_path}: {exc}") from exc
    if fov is not None:
        img = ImageBuffer(data=img.data, fov_deg=float(fov))
    table = load_acuity_csv(table_path)
    acuity = acuity_for_age(table, age)
    out_w = int(_setting(args, cfg, "out_width", img.width))
    out_h = int(_setting(args, cfg, "out_height", img.height))
    params = FoveationParams(warp_strength=warp, out_width=out_w,
                             out_height=out_h)
    blurred, foveated, combined = run_vision_pipeline(
        img, acuity, params, foveation_first=foveation_first)
    out = _out_dir(args)
    stem = image_path.stem
    age_tag = _fmt(age)
    paths = []
    for name, result in ((f"{stem}_acuity_{age_tag}.ppm", blurred),
                         (f"{stem}_foveated.ppm", foveated),
                         (f"{stem}_combined_{age_tag}.ppm", combined)):
        write_pnm(out / name, result)
        paths.append(out / name)
    print(paths[-1])
    return EXIT_OK


def _cmd_scene(args) -> int:
    if args.config is not None:
        config = SceneConfig.from_json_file(args.config)
    else:
        config = SceneConfig()
    scene = generate_scene(_seed(args), config)
    out = _out_dir(args)
    path = Path(args.scene_out) if args.scene_out else out / "scene.json"
    path.write_text(scene_to_json(scene), encoding="utf-8")
    print(path)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser and entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embodykit",
        description="Developmental-embodiment experiment harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="seed (default: EMBODYKIT_SEED or 0)")
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("grow", help="write an age-scaled body spec JSON")
    common(p)
    p.add_argument("--age", type=float, help="age in months")
    p.add_argument("--template", help="body template JSON path")
    p.add_argument("--tables", help="growth-table directory")
    p.set_defaults(func=_cmd_grow)

    p = sub.add_parser("growth-curves", help="height/head/mass vs age CSV")
    common(p)
    p.add_argument("--ages", help="comma-separated ages in months")
    p.add_argument("--template", help="body template JSON path")
    p.add_argument("--tables", help="growth-table directory")
    p.set_defaults(func=_cmd_growth_curves)

    p = sub.add_parser("strength-test", help="maximum-torque lift trajectories")
    common(p)
    p.add_argument("--ages", help="comma-separated ages in months")
    p.add_argument("--behavior", choices=["head_lift", "leg_lift", "both"],
                   help="which lift to run")
    p.add_argument("--template", help="body template JSON path")
    p.add_argument("--tables", help="growth-table directory")
    p.set_defaults(func=_cmd_strength_test)

    p = sub.add_parser("reach-demo", help="task-priority reaching, 3 gain sets")
    common(p)
    p.add_argument("--age", type=float, help="age in months")
    p.add_argument("--steps", type=int, help="steps per episode")
    p.add_argument("--template", help="body template JSON path")
    p.add_argument("--tables", help="growth-table directory")
    p.set_defaults(func=_cmd_reach_demo)

    p = sub.add_parser("delay-demo", help="reaching under sensory delays")
    common(p)
    p.add_argument("--age", type=float, help="age in months")
    p.add_argument("--steps", type=int, help="steps per episode")
    p.add_argument("--delays", help="comma-separated sensory delays in steps")
    p.add_argument("--template", help="body template JSON path")
    p.add_argument("--tables", help="growth-table directory")
    p.set_defaults(func=_cmd_delay_demo)

    p = sub.add_parser("vision-demo", help="acuity filter + foveation PPMs")
    common(p)
    p.add_argument("--image", help="input PPM/PGM path")
    p.add_argument("--age", type=float, help="age in months")
    p.add_argument("--fov", type=float, help="horizontal field of view (deg)")
    p.add_argument("--warp", type=float, help="foveation warp strength")
    p.add_argument("--out-width", type=int, help="foveated output width")
    p.add_argument("--out-height", type=int, help="foveated output height")
    p.add_argument("--foveation-first", action="store_true", default=None,
                   help="apply foveation before the acuity filter")
    p.add_argument("--acuity-table", help="acuity CSV path")
    p.set_defaults(func=_cmd_vision_demo)

    p = sub.add_parser("scene", help="generate a seeded scene JSON")
    common(p)
    p.add_argument("--scene-out", help="scene JSON output path")
    p.set_defaults(func=_cmd_scene)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (EmbodykitError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
