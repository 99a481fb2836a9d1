"""Hierarchical behavior policies: schema types, parsing, canonical serialization, validation.

A policy is a JSON document with named phases over a strictly sequential list of
behavior steps (no branching, no loops). Step parameters are literals (numbers,
text, 6-vector poses) or backward references to the output of an earlier
perception step, written ``{"$ref": "<step_id>.<field>"}``.

Wire schema (version ``vlp-policy/1``)::

    { "task_summary": string,
      "phases": [ { "name": string,
                    "steps": [ { "id": string,
                                 "kind": "action"|"perception",
                                 "name": string,
                                 "params": { string: number|string|[x,y,z,roll,pitch,yaw]|{"$ref": string} },
                                 "on_fail": "abort"|"replan" } ] } ],
      "version": "vlp-policy/1" }

Validation issue codes (``ValidationIssue.code``):

===================  ========  =============================================
code                 severity  meaning
===================  ========  =============================================
duplicate_step_id    error     two steps share an id
unknown_primitive    error     step name not in the catalog
kind_mismatch        error     step kind disagrees with the catalog
missing_param        error     required parameter absent
bad_param_type       error     literal or referenced value has the wrong type
forward_ref          error     $ref does not point at an earlier perception
                               step output (unknown id, later step, action
                               step, or unknown output field)
precondition_chain   warning   symbolic forward simulation proves a
                               precondition cannot hold at that step
noop_policy          warning   the policy contains no steps
unknown_param        warning   parameter not declared by the primitive
===================  ========  =============================================
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator, Mapping, Optional, Sequence, TYPE_CHECKING

if TYPE_CHECKING:
    from .primitives import PrimitiveCatalog

SCHEMA_VERSION = "vlp-policy/1"

#: World-frame pose: x, y, z in meters, roll, pitch, yaw in radians.
Pose = tuple[float, float, float, float, float, float]


class SchemaError(ValueError):
    """A policy document violates the wire schema."""

    def __init__(self, message: str, code: str = "schema"):
        super().__init__(message)
        self.code = code


class StepKind(str, Enum):
    ACTION = "action"
    PERCEPTION = "perception"


class OnFail(str, Enum):
    ABORT = "abort"
    REPLAN = "replan"


@dataclass(frozen=True)
class Ref:
    """Backward reference ``<step_id>.<field>`` to an earlier step's output."""

    target: str

    @property
    def step_id(self) -> str:
        return self.target.split(".", 1)[0]

    @property
    def field(self) -> str:
        parts = self.target.split(".", 1)
        return parts[1] if len(parts) == 2 else ""


ParamValue = Any  # int | float | str | Pose | Ref


@dataclass(frozen=True)
class BehaviorStep:
    id: str
    kind: StepKind
    name: str
    params: Mapping[str, ParamValue] = field(default_factory=dict)
    on_fail: OnFail = OnFail.REPLAN


@dataclass(frozen=True)
class Phase:
    name: str
    steps: tuple[BehaviorStep, ...] = ()


@dataclass(frozen=True)
class Policy:
    task_summary: str = ""
    phases: tuple[Phase, ...] = ()
    version: str = SCHEMA_VERSION

    def flatten(self) -> tuple[BehaviorStep, ...]:
        """Depth-first step sequence; the executor's single source of order."""
        return tuple(step for phase in self.phases for step in phase.steps)

    def step_ids(self) -> tuple[str, ...]:
        return tuple(step.id for step in self.flatten())


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" | "warning"
    step_id: Optional[str]
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...] = ()

    @property
    def ok(self) -> bool:
        return not any(issue.severity == "error" for issue in self.issues)

    @property
    def errors(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.severity == "error")

    @property
    def warnings(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.severity == "warning")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOP_LEVEL_KEYS = {"task_summary", "phases", "version"}


def _parse_pose(value: Sequence[Any], where: str) -> Pose:
    if len(value) != 6:
        raise SchemaError(f"{where}: pose must have 6 components, got {len(value)}", "wrong_type")
    out = []
    for component in value:
        if isinstance(component, bool) or not isinstance(component, (int, float)):
            raise SchemaError(f"{where}: pose components must be numbers", "wrong_type")
        out.append(float(component))
    return tuple(out)  # type: ignore[return-value]


def _parse_param_value(value: Any, where: str) -> ParamValue:
    if isinstance(value, bool):
        raise SchemaError(f"{where}: booleans are not valid parameter values", "wrong_type")
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, str):
        return value
    if isinstance(value, list):
        return _parse_pose(value, where)
    if isinstance(value, dict):
        if set(value.keys()) != {"$ref"} or not isinstance(value["$ref"], str):
            raise SchemaError(f"{where}: object values must be exactly {{\"$ref\": string}}", "wrong_type")
        return Ref(value["$ref"])
    raise SchemaError(f"{where}: unsupported parameter value type {type(value).__name__}", "wrong_type")


def _require(doc: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in doc:
        raise SchemaError(f"{where}: missing required field '{key}'", "missing_field")
    return doc[key]


def _parse_step(doc: Any, where: str) -> BehaviorStep:
    if not isinstance(doc, dict):
        raise SchemaError(f"{where}: step must be an object", "wrong_type")
    step_id = _require(doc, "id", where)
    if not isinstance(step_id, str) or not step_id:
        raise SchemaError(f"{where}: step id must be a non-empty string", "wrong_type")
    kind_raw = _require(doc, "kind", where)
    try:
        kind = StepKind(kind_raw)
    except ValueError:
        raise SchemaError(f"{where}: kind must be 'action' or 'perception', got {kind_raw!r}", "wrong_type")
    name = _require(doc, "name", where)
    if not isinstance(name, str) or not name:
        raise SchemaError(f"{where}: step name must be a non-empty string", "wrong_type")
    params_raw = doc.get("params", {})
    if not isinstance(params_raw, dict):
        raise SchemaError(f"{where}: params must be an object", "wrong_type")
    params = {
        key: _parse_param_value(value, f"{where}.params[{key!r}]") for key, value in params_raw.items()
    }
    on_fail_raw = doc.get("on_fail", OnFail.REPLAN.value)
    try:
        on_fail = OnFail(on_fail_raw)
    except ValueError:
        raise SchemaError(f"{where}: on_fail must be 'abort' or 'replan', got {on_fail_raw!r}", "wrong_type")
    return BehaviorStep(id=step_id, kind=kind, name=name, params=params, on_fail=on_fail)


def parse_policy(text: str | bytes, warnings: Optional[list[str]] = None) -> Policy:
    """Parse a policy document.

    Unknown top-level keys are ignored; a note is appended to ``warnings`` when
    a collector list is supplied. Raises :class:`SchemaError` on malformed
    JSON, missing required fields, wrong types, or duplicate step ids.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc}", "malformed_json")
    if not isinstance(doc, dict):
        raise SchemaError("policy document must be a JSON object", "wrong_type")

    def warn(message: str) -> None:
        if warnings is not None:
            warnings.append(message)

    for key in doc:
        if key not in _TOP_LEVEL_KEYS:
            warn(f"ignoring unknown top-level key {key!r}")

    task_summary = doc.get("task_summary", "")
    if not isinstance(task_summary, str):
        raise SchemaError("task_summary must be a string", "wrong_type")
    version = doc.get("version", SCHEMA_VERSION)
    if not isinstance(version, str):
        raise SchemaError("version must be a string", "wrong_type")
    if version != SCHEMA_VERSION:
        warn(f"unrecognized schema version {version!r}; parsed as {SCHEMA_VERSION}")

    phases_raw = _require(doc, "phases", "policy")
    if not isinstance(phases_raw, list):
        raise SchemaError("phases must be a list", "wrong_type")

    phases = []
    seen_ids: set[str] = set()
    for i, phase_doc in enumerate(phases_raw):
        where = f"phases[{i}]"
        if not isinstance(phase_doc, dict):
            raise SchemaError(f"{where}: phase must be an object", "wrong_type")
        name = _require(phase_doc, "name", where)
        if not isinstance(name, str):
            raise SchemaError(f"{where}: phase name must be a string", "wrong_type")
        steps_raw = phase_doc.get("steps", [])
        if not isinstance(steps_raw, list):
            raise SchemaError(f"{where}: steps must be a list", "wrong_type")
        steps = []
        for j, step_doc in enumerate(steps_raw):
            step = _parse_step(step_doc, f"{where}.steps[{j}]")
            if step.id in seen_ids:
                raise SchemaError(f"duplicate step id {step.id!r}", "duplicate_step_id")
            seen_ids.add(step.id)
            steps.append(step)
        phases.append(Phase(name=name, steps=tuple(steps)))

    return Policy(task_summary=task_summary, phases=tuple(phases), version=version)


# ---------------------------------------------------------------------------
# Canonical serialization
# ---------------------------------------------------------------------------


def _param_value_to_doc(value: ParamValue) -> Any:
    if isinstance(value, Ref):
        return {"$ref": value.target}
    if isinstance(value, tuple):
        return [float(component) for component in value]
    return value


def policy_to_doc(policy: Policy) -> dict[str, Any]:
    """Plain-JSON tree in canonical key order (params sorted by name)."""
    return {
        "task_summary": policy.task_summary,
        "phases": [
            {
                "name": phase.name,
                "steps": [
                    {
                        "id": step.id,
                        "kind": step.kind.value,
                        "name": step.name,
                        "params": {
                            key: _param_value_to_doc(step.params[key]) for key in sorted(step.params)
                        },
                        "on_fail": step.on_fail.value,
                    }
                    for step in phase.steps
                ],
            }
            for phase in policy.phases
        ],
        "version": policy.version,
    }


def serialize_policy(policy: Policy) -> str:
    """Canonical serialization: structurally equal policies yield identical bytes."""
    return json.dumps(policy_to_doc(policy), separators=(",", ":"), ensure_ascii=False)


def policy_digest(policy: Policy) -> str:
    """Short stable digest of the canonical serialization."""
    return hashlib.sha256(serialize_policy(policy).encode("utf-8")).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Validation against a primitive catalog
# ---------------------------------------------------------------------------

_TYPE_CHECKS = {
    "number": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    "text": lambda v: isinstance(v, str),
    "pose": lambda v: isinstance(v, (tuple, list))
    and len(v) == 6
    and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in v),
}


def _symbolic_holding(seen: Optional[bool], spec) -> Optional[bool]:
    # Three-valued gripper tracking: None = unknown.
    for post in spec.postconditions:
        if post == "holding_object":
            seen = True
        elif post == "gripper_empty":
            seen = False
    return seen


def validate_policy(policy: Policy, catalog: "PrimitiveCatalog") -> ValidationReport:
    """Catalog-aware static checks; see the module docstring for issue codes.

    A policy this function marks error-free will not hit unknown-primitive or
    parameter-shape failures at execution time.
    """
    issues: list[ValidationIssue] = []

    def add(severity: str, step_id: Optional[str], code: str, message: str) -> None:
        issues.append(ValidationIssue(severity, step_id, code, message))

    steps = policy.flatten()
    seen_ids: set[str] = set()
    for step in steps:
        if step.id in seen_ids:
            add("error", step.id, "duplicate_step_id", f"step id {step.id!r} is not unique")
        seen_ids.add(step.id)

    if not steps:
        add("warning", None, "noop_policy", "policy contains no steps")
        return ValidationReport(tuple(issues))

    # Output schemas of perception steps seen so far, for $ref checking.
    producer_outputs: dict[str, Mapping[str, str]] = {}
    holding: Optional[bool] = None  # unknown until proven

    for step in steps:
        spec = catalog.primitives.get(step.name)
        if spec is None:
            add("error", step.id, "unknown_primitive", f"primitive {step.name!r} is not in the catalog")
            continue
        if spec.kind != step.kind:
            add(
                "error",
                step.id,
                "kind_mismatch",
                f"step kind {step.kind.value!r} but catalog declares {step.name!r} as {spec.kind.value!r}",
            )

        declared = {p.name: p for p in spec.params}
        for param in spec.params:
            if param.required and param.name not in step.params:
                add("error", step.id, "missing_param", f"{step.name!r} requires parameter {param.name!r}")
        for key, value in step.params.items():
            declared_param = declared.get(key)
            if declared_param is None:
                add("warning", step.id, "unknown_param", f"{step.name!r} does not declare parameter {key!r}")
                continue
            if isinstance(value, Ref):
                outputs = producer_outputs.get(value.step_id)
                if outputs is None or not value.field:
                    add(
                        "error",
                        step.id,
                        "forward_ref",
                        f"$ref {value.target!r} does not resolve to an earlier perception step output",
                    )
                    continue
                ref_type = outputs.get(value.field)
                if ref_type is None:
                    add(
                        "error",
                        step.id,
                        "forward_ref",
                        f"$ref {value.target!r}: step {value.step_id!r} has no output field {value.field!r}",
                    )
                elif ref_type != declared_param.type:
                    add(
                        "error",
                        step.id,
                        "bad_param_type",
                        f"parameter {key!r} of {step.name!r} expects {declared_param.type}, "
                        f"$ref {value.target!r} yields {ref_type}",
                    )
            else:
                check = _TYPE_CHECKS[declared_param.type]
                if not check(value):
                    add(
                        "error",
                        step.id,
                        "bad_param_type",
                        f"parameter {key!r} of {step.name!r} expects {declared_param.type}",
                    )

        # Precondition chain over the symbolic gripper state: warn only on
        # provable violations (unknown start state stays unknown).
        for pre in spec.preconditions:
            if pre == "gripper_empty" and holding is True:
                add(
                    "warning",
                    step.id,
                    "precondition_chain",
                    f"{step.name!r} requires an empty gripper but an earlier step leaves an object held",
                )
            elif pre == "holding_object" and holding is False:
                add(
                    "warning",
                    step.id,
                    "precondition_chain",
                    f"{step.name!r} requires a held object but the gripper is provably empty",
                )
        holding = _symbolic_holding(holding, spec)

        if spec.kind == StepKind.PERCEPTION:
            producer_outputs[step.id] = spec.outputs

    return ValidationReport(tuple(issues))


def iter_refs(step: BehaviorStep) -> Iterator[tuple[str, Ref]]:
    """(param name, Ref) pairs for every reference parameter of a step."""
    for key, value in step.params.items():
        if isinstance(value, Ref):
            yield key, value
