"""File formats: JSON state files, experiment manifests, CSV report tables.

States and manifests are JSON (human-diffable, language neutral); per-index
tables are CSV.  Numeric output uses 6 decimal places in nats with the
literal ``inf`` for infinite values.  Emission is canonical (sorted keys,
two-space indent), so emitting a parsed canonical file is byte-identical.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .freesets import ConvexHull, FreeSetModel, FullySeparable, PiSeparable, Ppt, OracleConfig
from .operators import DensityOperator, Partition, PartitionSet, SystemLayout
from .sequences import ConvergenceReport, HarnessConfig, ModelReport
from .solver import SolverConfig


class FormatError(ValueError):
    """A file failed parsing or schema validation."""


# ---------------------------------------------------------------------------
# State files
# ---------------------------------------------------------------------------

_STATE_KEYS = {"dims", "matrix", "label"}


def state_from_json_text(text: str) -> tuple[DensityOperator, str | None]:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise FormatError("state file must be a JSON object")
    unknown = set(obj) - _STATE_KEYS
    if unknown:
        raise FormatError(f"unknown state-file keys: {sorted(unknown)}")
    if "dims" not in obj or "matrix" not in obj:
        raise FormatError("state file needs 'dims' and 'matrix'")
    dims = obj["dims"]
    if not isinstance(dims, list) or not dims or not all(
        isinstance(d, int) and d >= 1 for d in dims
    ):
        raise FormatError("'dims' must be a list of positive integers")
    n = int(np.prod(dims))
    rows = obj["matrix"]
    if not isinstance(rows, list) or len(rows) != n:
        raise FormatError(f"'matrix' must have {n} rows")
    mat = np.zeros((n, n), dtype=complex)
    for r, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise FormatError(f"matrix row {r} must have {n} entries")
        for c, cell in enumerate(row):
            if (
                not isinstance(cell, list)
                or len(cell) != 2
                or not all(isinstance(x, (int, float)) and math.isfinite(x) for x in cell)
            ):
                raise FormatError(
                    f"matrix entry at row {r}, col {c} must be a finite [re, im] pair"
                )
            mat[r, c] = complex(cell[0], cell[1])
    asym = np.abs(mat - mat.conj().T)
    if asym.size and float(asym.max()) > 1e-8:
        r, c = np.unravel_index(int(np.argmax(asym)), asym.shape)
        raise FormatError(f"matrix is not Hermitian; first violation at row {r}, col {c}")
    label = obj.get("label")
    if label is not None and not isinstance(label, str):
        raise FormatError("'label' must be a string")
    try:
        state = DensityOperator(mat, dims)
    except ValueError as exc:
        raise FormatError(f"not a valid state: {exc}") from exc
    return state, label


def state_to_json_text(state: DensityOperator, label: str | None = None) -> str:
    mat = state.matrix
    obj = {
        "dims": list(state.layout.dims),
        "matrix": [[[float(x.real), float(x.imag)] for x in row] for row in mat],
    }
    if label is not None:
        obj["label"] = label
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def load_state(path: str) -> tuple[DensityOperator, str | None]:
    with open(path, "r", encoding="utf-8") as fh:
        return state_from_json_text(fh.read())


def save_state(path: str, state: DensityOperator, label: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(state_to_json_text(state, label))


# ---------------------------------------------------------------------------
# Free-set descriptors
# ---------------------------------------------------------------------------

def _parse_partition(text: str) -> Partition:
    body = text.strip()
    if not (body.startswith("{{") and body.endswith("}}")):
        raise FormatError(f"bad partition descriptor: {text!r}")
    inner = body[1:-1]
    blocks = []
    depth = 0
    token = ""
    for ch in inner:
        if ch == "{":
            depth += 1
            token = ""
        elif ch == "}":
            depth -= 1
            blocks.append(token)
        elif depth == 1:
            token += ch
    try:
        parsed = [tuple(int(x) for x in b.split(",") if x.strip()) for b in blocks]
        return Partition(parsed)
    except ValueError as exc:
        raise FormatError(f"bad partition descriptor {text!r}: {exc}") from exc


def parse_model_descriptor(desc: str, layout: SystemLayout, base_dir: str = ".") -> FreeSetModel:
    """Parse ``separable``, ``ppt[:i,j]``, ``pi:<partitions>`` or ``hull:<path>``."""
    desc = desc.strip()
    if desc == "separable":
        return FullySeparable(layout)
    if desc == "ppt" or desc.startswith("ppt:"):
        if desc == "ppt":
            block = (layout.m,)
        else:
            try:
                block = tuple(int(x) for x in desc[4:].split(","))
            except ValueError as exc:
                raise FormatError(f"bad ppt descriptor {desc!r}") from exc
        try:
            return Ppt(layout, block)
        except ValueError as exc:
            raise FormatError(str(exc)) from exc
    if desc.startswith("pi:"):
        parts = [_parse_partition(p) for p in desc[3:].split("|")]
        try:
            return PiSeparable(layout, PartitionSet(parts))
        except ValueError as exc:
            raise FormatError(str(exc)) from exc
    if desc.startswith("hull:"):
        path = os.path.join(base_dir, desc[5:])
        try:
            with open(path, "r", encoding="utf-8") as fh:
                arr = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise FormatError(f"cannot read hull file {path}: {exc}") from exc
        if not isinstance(arr, list) or not arr:
            raise FormatError("hull file must be a non-empty JSON array of states")
        states = []
        for item in arr:
            state, _ = state_from_json_text(json.dumps(item))
            states.append(state)
        if any(s.layout.dims != tuple(layout.dims) for s in states):
            raise FormatError("hull states must match the manifest layout")
        return ConvexHull(states)
    raise FormatError(f"unknown free-set descriptor {desc!r}")


# ---------------------------------------------------------------------------
# Experiment manifests
# ---------------------------------------------------------------------------

_MANIFEST_KEYS = {
    "family", "dims", "n", "seed", "params", "models", "tau", "tail", "solver", "oracle",
}
_SOLVER_KEYS = {"max_iterations", "stopping_gap", "line_search_evals", "support_tol"}
_ORACLE_KEYS = {"restarts", "sweeps", "tol", "ppt_iterations", "ppt_tol"}
_FAMILIES = {"constant", "dominated", "mixture", "pushforward", "lsc_gap"}
_FRAGMENT_KEYS = {"family", "params", "seed"}


@dataclass
class Manifest:
    family: str
    layout: SystemLayout
    n: int
    seed: int
    params: dict
    model_descriptors: list[str]
    harness: HarnessConfig


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise FormatError(msg)


def _validate_fragment(obj, where: str) -> None:
    _require(isinstance(obj, dict), f"{where} must be an object")
    unknown = set(obj) - _FRAGMENT_KEYS
    _require(not unknown, f"unknown keys in {where}: {sorted(unknown)}")
    _require(obj.get("family") in _FAMILIES, f"{where} needs a known 'family'")
    params = obj.get("params", {})
    _require(isinstance(params, dict), f"{where}.params must be an object")
    if obj["family"] == "mixture":
        for sub in ("a", "b"):
            _validate_fragment(params.get(sub), f"{where}.params.{sub}")
    if obj["family"] == "pushforward":
        _validate_fragment(params.get("base"), f"{where}.params.base")


def manifest_from_json_text(text: str) -> Manifest:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from exc
    _require(isinstance(obj, dict), "manifest must be a JSON object")
    unknown = set(obj) - _MANIFEST_KEYS
    _require(not unknown, f"unknown manifest keys: {sorted(unknown)}")
    for key in ("family", "dims", "n", "models"):
        _require(key in obj, f"manifest needs '{key}'")
    _require(obj["family"] in _FAMILIES, f"unknown family {obj['family']!r}")
    dims = obj["dims"]
    _require(
        isinstance(dims, list) and dims and all(isinstance(d, int) and d >= 1 for d in dims),
        "'dims' must be a list of positive integers",
    )
    n = obj["n"]
    _require(isinstance(n, int) and n >= 1, "'n' must be a positive integer")
    seed = obj.get("seed", 0)
    _require(isinstance(seed, int), "'seed' must be an integer")
    params = obj.get("params", {})
    _require(isinstance(params, dict), "'params' must be an object")
    if obj["family"] == "mixture":
        _validate_fragment(params.get("a"), "params.a")
        _validate_fragment(params.get("b"), "params.b")
    if obj["family"] == "pushforward":
        _validate_fragment(params.get("base"), "params.base")
    models = obj["models"]
    _require(
        isinstance(models, list) and models and all(isinstance(s, str) for s in models),
        "'models' must be a non-empty list of descriptors",
    )
    tau = obj.get("tau", 5e-3)
    tail = obj.get("tail", 3)
    _require(isinstance(tau, (int, float)) and tau > 0, "'tau' must be positive")
    _require(isinstance(tail, int) and tail >= 1, "'tail' must be a positive integer")
    solver_obj = obj.get("solver", {})
    _require(isinstance(solver_obj, dict), "'solver' must be an object")
    _require(
        not set(solver_obj) - _SOLVER_KEYS,
        f"unknown solver keys: {sorted(set(solver_obj) - _SOLVER_KEYS)}",
    )
    oracle_obj = obj.get("oracle", {})
    _require(isinstance(oracle_obj, dict), "'oracle' must be an object")
    _require(
        not set(oracle_obj) - _ORACLE_KEYS,
        f"unknown oracle keys: {sorted(set(oracle_obj) - _ORACLE_KEYS)}",
    )
    oracle = OracleConfig(seed=seed, **oracle_obj)
    solver = SolverConfig(oracle=oracle, **solver_obj)
    harness = HarnessConfig(tau=float(tau), tail=tail, solver=solver)
    return Manifest(
        obj["family"], SystemLayout(dims), n, seed, params, list(models), harness
    )


def load_manifest(path: str) -> Manifest:
    with open(path, "r", encoding="utf-8") as fh:
        return manifest_from_json_text(fh.read())


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

def format_nats(x: float | None) -> str:
    if x is None:
        return ""
    if math.isinf(x):
        return "inf"
    return f"{x:.6f}"


def _slug(label: str) -> str:
    out = []
    for ch in label:
        out.append(ch if ch.isalnum() else "_")
    slug = "".join(out)
    while "__" in slug:
        slug = slug.replace("__", "_")
    return slug.strip("_")


def model_report_csv(report: ModelReport) -> str:
    lines = ["n,trace_dist,lower,upper,gap,mi"]
    for row in list(report.rows) + [report.limit_row]:
        lines.append(
            ",".join(
                [
                    str(row.n),
                    format_nats(row.trace_dist),
                    format_nats(row.lower),
                    format_nats(row.upper),
                    format_nats(row.gap),
                    format_nats(row.mutual_information),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def verdicts_json_text(report: ConvergenceReport, seed: int) -> str:
    obj = {
        "tau": report.tau,
        "tail": report.tail,
        "seed": seed,
        "models": {
            m.label: {
                "observed": m.observed,
                "predicted": m.predicted,
                "fired_clauses": m.fired_clauses,
                "agreement": m.agreement,
                "separation": None if math.isnan(m.separation) else m.separation,
            }
            for m in report.models
        },
        "implications": [
            {
                "premise": c.premise_label,
                "conclusion": c.conclusion_label,
                "premise_observed": c.premise_observed,
                "conclusion_observed": c.conclusion_observed,
                "ok": c.ok,
            }
            for c in report.implications
        ],
    }
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_report(report: ConvergenceReport, out_dir: str, seed: int) -> list[str]:
    """Write one CSV per model plus the verdict block; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for m in report.models:
        path = os.path.join(out_dir, f"report_{_slug(m.label)}.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(model_report_csv(m))
        paths.append(path)
    vpath = os.path.join(out_dir, "verdicts.json")
    with open(vpath, "w", encoding="utf-8", newline="") as fh:
        fh.write(verdicts_json_text(report, seed))
    paths.append(vpath)
    return paths
