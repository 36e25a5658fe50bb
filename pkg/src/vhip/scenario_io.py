"""Scenario JSON documents: strict parsing, validation, and serialization.

The document mirrors :class:`vhip.simulation.Scenario` plus metadata.  See
README for the schema.  Unknown keys are rejected so typos fail loudly;
parse errors carry line/column diagnostics from the JSON decoder.
"""

from __future__ import annotations

import json
from typing import Optional

import numpy as np

from .control import ControllerConfig
from .core import PendulumState, PhysicalConstants
from .errors import ScenarioError
from .geometry import ContactSurface
from .simulation import CONTROLLER_KINDS, ConvergenceCriteria, Push, Scenario


def _reject_unknown(data: dict, allowed: set[str], where: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ScenarioError(f"unknown key(s) {sorted(unknown)} in {where}")


def _number(data: dict, key: str, where: str, default=None, required=False):
    if key not in data:
        if required:
            raise ScenarioError(f"missing required key {key!r} in {where}")
        return default
    value = data[key]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ScenarioError(f"{where}.{key} must be a number, got {value!r}")
    return float(value)


def _vector(data: dict, key: str, where: str, length: int, required=True):
    if key not in data:
        if required:
            raise ScenarioError(f"missing required key {key!r} in {where}")
        return None
    value = data[key]
    ok = isinstance(value, list) and len(value) == length and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    )
    if not ok:
        raise ScenarioError(f"{where}.{key} must be a list of {length} numbers")
    return [float(v) for v in value]


def _surface_from_dict(data: dict, where: str) -> ContactSurface:
    if not isinstance(data, dict):
        raise ScenarioError(f"{where} must be an object")
    try:
        if "vertices" in data:
            _reject_unknown(data, {"vertices"}, where)
            verts = data["vertices"]
            if not isinstance(verts, list) or len(verts) < 3:
                raise ScenarioError(f"{where}.vertices must list at least 3 points")
            rows = [
                _vector({"p": v}, "p", f"{where}.vertices[{i}]", 3)
                for i, v in enumerate(verts)
            ]
            return ContactSurface.from_vertices(np.array(rows))
        _reject_unknown(data, {"center", "half_extents", "normal", "yaw"}, where)
        center = _vector(data, "center", where, 3)
        half = _vector(data, "half_extents", where, 2)
        normal = _vector(data, "normal", where, 3, required=False) or [0.0, 0.0, 1.0]
        yaw = _number(data, "yaw", where, default=0.0)
        return ContactSurface.rectangle(center, half, normal, yaw)
    except ScenarioError:
        raise
    except Exception as exc:
        raise ScenarioError(f"invalid surface in {where}: {exc}") from exc


def scenario_from_dict(data: dict) -> Scenario:
    """Build a validated Scenario from a parsed JSON document."""
    if not isinstance(data, dict):
        raise ScenarioError("scenario document must be a JSON object")
    _reject_unknown(
        data,
        {
            "name",
            "description",
            "seed",
            "constants",
            "initial",
            "surfaces",
            "controller",
            "pushes",
            "step_size",
            "max_time",
            "convergence",
            "on_unrecoverable",
        },
        "scenario",
    )
    name = data.get("name", "")
    description = data.get("description", "")
    if not isinstance(name, str) or not isinstance(description, str):
        raise ScenarioError("name and description must be strings")
    seed = data.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise ScenarioError("seed must be an integer")

    const_data = data.get("constants", {})
    if not isinstance(const_data, dict):
        raise ScenarioError("constants must be an object")
    _reject_unknown(const_data, {"gravity", "mass"}, "constants")
    try:
        constants = PhysicalConstants(
            gravity=_number(const_data, "gravity", "constants", default=9.81),
            mass=_number(const_data, "mass", "constants", default=1.0),
        )
    except ValueError as exc:
        raise ScenarioError(f"invalid constants: {exc}") from exc

    init = data.get("initial")
    if not isinstance(init, dict):
        raise ScenarioError("missing required object 'initial'")
    _reject_unknown(init, {"position", "velocity"}, "initial")
    try:
        initial = PendulumState(
            _vector(init, "position", "initial", 3),
            _vector(init, "velocity", "initial", 3, required=False) or [0.0, 0.0, 0.0],
        )
    except ValueError as exc:
        raise ScenarioError(f"invalid initial state: {exc}") from exc

    raw_surfaces = data.get("surfaces")
    if not isinstance(raw_surfaces, list) or len(raw_surfaces) == 0:
        raise ScenarioError("'surfaces' must be a nonempty list")
    surfaces = tuple(
        _surface_from_dict(s, f"surfaces[{i}]") for i, s in enumerate(raw_surfaces)
    )

    ctrl = data.get("controller")
    if not isinstance(ctrl, dict):
        raise ScenarioError("missing required object 'controller'")
    _reject_unknown(
        ctrl,
        {
            "type",
            "target_height",
            "dcm_target",
            "cop_gain",
            "cop_gain_mode",
            "stiffness_limit",
            "margin",
            "fixed_cop",
        },
        "controller",
    )
    kind = ctrl.get("type")
    if kind not in CONTROLLER_KINDS:
        raise ScenarioError(
            f"controller.type must be one of {CONTROLLER_KINDS}, got {kind!r}"
        )
    try:
        config = ControllerConfig(
            target_height=_number(ctrl, "target_height", "controller", required=True),
            dcm_target=_vector(ctrl, "dcm_target", "controller", 2, required=False),
            cop_gain=_number(ctrl, "cop_gain", "controller", default=0.5),
            cop_gain_mode=ctrl.get("cop_gain_mode", "direct"),
            stiffness_limit=_number(ctrl, "stiffness_limit", "controller"),
            margin=_number(ctrl, "margin", "controller", default=0.05),
            fixed_cop=_vector(ctrl, "fixed_cop", "controller", 3, required=False),
        )
    except ValueError as exc:
        raise ScenarioError(f"invalid controller config: {exc}") from exc

    pushes = []
    for i, p in enumerate(data.get("pushes", [])):
        if not isinstance(p, dict):
            raise ScenarioError(f"pushes[{i}] must be an object")
        _reject_unknown(p, {"time", "dv"}, f"pushes[{i}]")
        pushes.append(
            Push(
                _number(p, "time", f"pushes[{i}]", required=True),
                _vector(p, "dv", f"pushes[{i}]", 3),
            )
        )

    conv_data = data.get("convergence", {})
    if not isinstance(conv_data, dict):
        raise ScenarioError("convergence must be an object")
    _reject_unknown(conv_data, {"speed_tol", "position_tol", "dwell"}, "convergence")
    convergence = ConvergenceCriteria(
        speed_tol=_number(conv_data, "speed_tol", "convergence", default=1e-3),
        position_tol=_number(conv_data, "position_tol", "convergence", default=5e-3),
        dwell=_number(conv_data, "dwell", "convergence", default=0.2),
    )

    try:
        return Scenario(
            constants=constants,
            initial=initial,
            surfaces=surfaces,
            controller=kind,
            config=config,
            pushes=tuple(pushes),
            step_size=_number(data, "step_size", "scenario", default=1e-3),
            max_time=_number(data, "max_time", "scenario", default=10.0),
            convergence=convergence,
            on_unrecoverable=data.get("on_unrecoverable", "fallback"),
            name=name,
            description=description,
            seed=seed,
        )
    except ValueError as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from exc


def scenario_to_dict(scenario: Scenario) -> dict:
    """JSON-compatible document for a Scenario (surfaces as vertex lists)."""
    config = scenario.config
    out = {
        "name": scenario.name,
        "description": scenario.description,
        "constants": {
            "gravity": scenario.constants.gravity,
            "mass": scenario.constants.mass,
        },
        "initial": {
            "position": scenario.initial.position.tolist(),
            "velocity": scenario.initial.velocity.tolist(),
        },
        "surfaces": [{"vertices": s.vertices.tolist()} for s in scenario.surfaces],
        "controller": {
            "type": scenario.controller,
            "target_height": config.target_height,
            "dcm_target": config.dcm_target.tolist(),
            "cop_gain": config.cop_gain,
            "cop_gain_mode": config.cop_gain_mode,
            "margin": config.margin,
        },
        "pushes": [{"time": p.time, "dv": p.dv.tolist()} for p in scenario.pushes],
        "step_size": scenario.step_size,
        "max_time": scenario.max_time,
        "convergence": {
            "speed_tol": scenario.convergence.speed_tol,
            "position_tol": scenario.convergence.position_tol,
            "dwell": scenario.convergence.dwell,
        },
        "on_unrecoverable": scenario.on_unrecoverable,
    }
    if config.stiffness_limit is not None:
        out["controller"]["stiffness_limit"] = config.stiffness_limit
    if config.fixed_cop is not None:
        out["controller"]["fixed_cop"] = config.fixed_cop.tolist()
    if scenario.seed is not None:
        out["seed"] = scenario.seed
    return out


def load_scenario(path) -> Scenario:
    """Read and validate a scenario JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"JSON parse error in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return scenario_from_dict(data)


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2, sort_keys=True)
        fh.write("\n")
