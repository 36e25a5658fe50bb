"""Command-line front end: analyze | simulate | sweep | version.

Exit codes: ``analyze`` returns 0 when capturable, 1 when not, 2 on errors;
the other commands return 0 on completion and 2 on errors.  Set the
``VHIP_LOG`` environment variable (DEBUG/INFO/WARNING) for verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from multiprocessing import Pool

import numpy as np

from . import __version__
from .capturability import assess_zero_step, fixed_cop_capture_segment, separation_certificate
from .core import PendulumState
from .errors import VhipError
from .scenario_io import load_scenario, scenario_from_dict, scenario_to_dict
from .simulation import Push, run

log = logging.getLogger("vhip")


def _parse_grid(text: str, what: str) -> np.ndarray:
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise SystemExit(f"error: {what} must look like lo:hi:count, got {text!r}")
    if n < 1:
        raise SystemExit(f"error: {what} needs count >= 1")
    return np.linspace(lo, hi, n)


def _analyze_report(scenario, stiffness_limit):
    assessment = assess_zero_step(
        scenario.initial, scenario.support, scenario.constants, stiffness_limit
    )
    report = assessment.as_dict()
    segment = fixed_cop_capture_segment(scenario.initial, scenario.support, scenario.constants)
    report["capture_segment"] = (
        None if segment is None else [segment[0].tolist(), segment[1].tolist()]
    )
    report["certificate"] = None
    if not assessment.capturable:
        certificate = separation_certificate(
            scenario.initial, scenario.support, scenario.constants
        )
        if certificate is None:
            report["certificate_search"] = "failed"
        else:
            report["certificate"] = certificate.as_dict()
            report["certificate_search"] = "found"
    return assessment, report


def cmd_analyze(args) -> int:
    scenario = load_scenario(args.scenario)
    assessment, report = _analyze_report(scenario, args.u_max)
    if args.json:
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    else:
        lines = [f"scenario: {scenario.name or args.scenario}"]
        lines.append(f"capturable: {assessment.capturable}")
        w = assessment.window
        lines.append(
            f"tau window: enter={w.tau_enter!r} exit={w.tau_exit!r} "
            f"ground={w.tau_ground!r} icp={w.tau_icp!r}"
        )
        if assessment.feasible_interval is not None:
            lo, hi = assessment.feasible_interval
            lines.append(f"feasible interval: ({lo!r}, {hi!r})")
        if assessment.suggested_cop is not None:
            lines.append(f"suggested fixed cop: {assessment.suggested_cop.tolist()}")
        if report["capture_segment"] is not None:
            lines.append(f"capture segment: {report['capture_segment']}")
        if assessment.failure_reasons:
            lines.append(f"failure reasons: {', '.join(sorted(assessment.failure_reasons))}")
        if report["certificate"] is not None:
            cert = report["certificate"]
            lines.append(
                f"separation certificate: normal={cert['normal']} offset={cert['offset']!r}"
            )
        elif not assessment.capturable:
            lines.append("separation certificate: search failed")
        text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0 if assessment.capturable else 1


def _write_svg(path, log_data) -> None:
    """Minimal multi-series SVG line chart of the trajectory."""
    width, height, pad = 720, 360, 45
    t = log_data.times
    series = [
        ("z", log_data.positions[:, 2], "#1f77b4"),
        ("tg", log_data.virtual_time, "#2ca02c"),
        ("zcg", log_data.critical_height, "#d62728"),
        ("u/10", log_data.stiffness / 10.0, "#9467bd"),
    ]
    values = np.concatenate([s[1] for s in series])
    values = values[np.isfinite(values)]
    lo, hi = float(values.min()), float(values.max())
    if hi - lo < 1e-9:
        hi = lo + 1.0
    t_span = max(float(t[-1] - t[0]), 1e-9)

    def sx(x):
        return pad + (x - t[0]) / t_span * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - lo) / (hi - lo) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
    ]
    for idx, (label, ys, color) in enumerate(series):
        pts = " ".join(
            f"{sx(float(ti)):.2f},{sy(float(yi)):.2f}"
            for ti, yi in zip(t, ys)
            if np.isfinite(yi)
        )
        parts.append(f'<polyline fill="none" stroke="{color}" points="{pts}"/>')
        parts.append(
            f'<text x="{width - pad + 4}" y="{pad + 14 * idx}" fill="{color}" '
            f'font-size="11">{label}</text>'
        )
    parts.append(
        f'<text x="{pad}" y="{height - 8}" font-size="11">t in [{t[0]:.3g}, {t[-1]:.3g}] s, '
        f'values in [{lo:.3g}, {hi:.3g}]</text>'
    )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    result = run(scenario)
    result.to_csv(args.out)
    if args.events:
        result.events_to_json(args.events)
    if args.plot:
        _write_svg(args.plot, result)
    final = result.final_state()
    sys.stdout.write(
        f"outcome: {result.outcome}\n"
        f"duration: {result.times[-1]!r} s ({len(result)} samples)\n"
        f"final position: {final.position.tolist()}\n"
        f"final speed: {float(np.linalg.norm(final.velocity))!r} m/s\n"
        f"events: {', '.join(e.kind for e in result.events) or 'none'}\n"
    )
    return 0


def _sweep_cell(payload):
    """One sweep cell: capturability verdict of the pushed state + outcome."""
    data, angle, speed, push_time = payload
    try:
        scenario = scenario_from_dict(data)
        dv = [speed * float(np.cos(np.radians(angle))), speed * float(np.sin(np.radians(angle))), 0.0]
        pushed = replace(scenario, pushes=(Push(push_time, dv),))
        post_push = PendulumState(
            scenario.initial.position, scenario.initial.velocity + np.asarray(dv)
        )
        assessment = assess_zero_step(
            post_push,
            pushed.support,
            pushed.constants,
            stiffness_limit=scenario.config.stiffness_limit,
        )
        outcome = run(pushed).outcome
        return {
            "angle_deg": angle,
            "speed": speed,
            "verdict": "capturable" if assessment.capturable else "not-capturable",
            "outcome": outcome,
            "error": "",
        }
    except (VhipError, ValueError) as exc:
        return {
            "angle_deg": angle,
            "speed": speed,
            "verdict": "error",
            "outcome": "error",
            "error": str(exc),
        }


def cmd_sweep(args) -> int:
    scenario = load_scenario(args.template)
    data = scenario_to_dict(scenario)
    angles = _parse_grid(args.push_angles, "--push-angles")
    speeds = _parse_grid(args.push_speeds, "--push-speeds")
    push_time = args.push_time
    if push_time is None:
        push_time = scenario.pushes[0].time if scenario.pushes else 0.5
    cells = [
        (data, float(a), float(s), float(push_time)) for a in angles for s in speeds
    ]
    log.info("sweeping %d cells on %d workers", len(cells), args.workers)
    if args.workers > 1:
        with Pool(args.workers) as pool:
            rows = pool.map(_sweep_cell, cells)
    else:
        rows = [_sweep_cell(c) for c in cells]

    # verdict/outcome agreement, ignoring a band near the verdict boundary
    verdicts = np.array([r["verdict"] == "capturable" for r in rows]).reshape(
        len(angles), len(speeds)
    )
    boundary = np.zeros_like(verdicts, dtype=bool)
    for shift in (1, 2):
        boundary[:, shift:] |= verdicts[:, shift:] != verdicts[:, :-shift]
        boundary[:, :-shift] |= verdicts[:, shift:] != verdicts[:, :-shift]
    agree = interior = 0
    for idx, row in enumerate(rows):
        i, j = divmod(idx, len(speeds))
        row["boundary_band"] = bool(boundary[i, j])
        if row["verdict"] != "error" and not boundary[i, j]:
            interior += 1
            if (row["verdict"] == "capturable") == (row["outcome"] == "converged"):
                agree += 1

    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("angle_deg,speed,verdict,outcome,boundary_band,error\n")
        for row in rows:
            fh.write(
                f"{row['angle_deg']!r},{row['speed']!r},{row['verdict']},"
                f"{row['outcome']},{int(row['boundary_band'])},{row['error']}\n"
            )
    pct = 100.0 * agree / interior if interior else 100.0
    sys.stdout.write(
        f"cells: {len(rows)}; interior agreement: {agree}/{interior} ({pct:.1f}%)\n"
        f"wrote {args.out}\n"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vhip", description="3D variable-height inverted pendulum toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="0-step capturability report for a scenario")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--u-max", type=float, default=None, help="stiffness upper bound")
    p.add_argument("--json", action="store_true", help="emit a JSON report")
    p.add_argument("--out", default=None, help="also write the report to a file")

    p = sub.add_parser("simulate", help="run a scenario and write its trajectory")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--out", default="trajectory.csv", help="trajectory CSV path")
    p.add_argument("--events", default=None, help="events/outcome JSON path")
    p.add_argument("--plot", default=None, help="optional SVG line chart path")

    p = sub.add_parser("sweep", help="grid-sweep push direction and magnitude")
    p.add_argument("template", help="template scenario JSON file")
    p.add_argument("--push-angles", default="0:330:12", help="degrees, lo:hi:count")
    p.add_argument("--push-speeds", default="0:1:11", help="m/s, lo:hi:count")
    p.add_argument("--push-time", type=float, default=None, help="push instant (s)")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--out", default="sweep.csv", help="result CSV path")

    sub.add_parser("version", help="print the package version")
    return parser


def main(argv=None) -> int:
    level = os.environ.get("VHIP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "version":
            sys.stdout.write(f"vhip {__version__}\n")
            return 0
        if args.command == "analyze":
            return cmd_analyze(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "sweep":
            return cmd_sweep(args)
    except VhipError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    parser.error(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
