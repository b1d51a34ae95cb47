"""Files written and read by the command line tools.

Every float is written with 17 significant digits so doubles survive a
round trip exactly. JSON objects are written with sorted keys so equal
inputs give byte-identical files (apart from the ``timestamp`` field).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError
from .radial import INNER, OUTER, AnnulusProblem, Branch, Junction, RadialSolution, SolverOptions

CSV_HEADER = ("side",) + Branch.COLUMNS


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _short(x) -> str:
    """Shortest round-tripping repr, for the human-readable summary."""
    return repr(float(x))


def _plain(obj):
    """Convert numpy scalars/arrays, tuples and dataclasses to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if hasattr(obj, "__dataclass_fields__"):
        return _plain(asdict(obj))
    return obj


def dumps(obj, indent: int = 2) -> str:
    """JSON text with floats at 17 significant digits; NaN/inf become null."""

    def enc(o, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if o is None:
            return "null"
        if isinstance(o, bool):
            return "true" if o else "false"
        if isinstance(o, int):
            return str(o)
        if isinstance(o, float):
            return fmt(o) if math.isfinite(o) else "null"
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, list):
            if not o:
                return "[]"
            if all(not isinstance(v, (list, dict)) for v in o):
                return "[" + ", ".join(enc(v, level + 1) for v in o) + "]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in o) + "\n" + end + "]"
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = (pad + json.dumps(k) + ": " + enc(o[k], level + 1) for k in sorted(o))
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(_plain(obj), 0) + "\n"


def input_hash(obj) -> str:
    """Short SHA-256 of the canonical JSON form of ``obj``."""
    return hashlib.sha256(dumps(obj, indent=0).encode()).hexdigest()[:16]


def timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path} is not valid JSON: {exc}") from None


def write_text(path, text: str):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    except OSError as exc:
        raise ConfigurationError(f"cannot write {path}: {exc.strerror}") from None


# -- annulus solutions ------------------------------------------------------


def solution_csv(sol: RadialSolution) -> str:
    lines = [",".join(CSV_HEADER)]
    for br in (sol.inner, sol.outer):
        cols = [getattr(br, c) for c in Branch.COLUMNS]
        for i in range(len(br)):
            lines.append(",".join([br.side] + [fmt(c[i]) for c in cols]))
    return "\n".join(lines) + "\n"


def solution_record(sol: RadialSolution, seed: int | None = None) -> dict:
    inputs = {"problem": sol.problem, "options": sol.options}
    return {
        "problem": sol.problem,
        "options": sol.options,
        "junction": sol.junction,
        "stats": sol.stats,
        "seed": seed,
        "version": __version__,
        "input_hash": input_hash(inputs),
        "timestamp": timestamp(),
    }


def write_solution(sol: RadialSolution, prefix, seed: int | None = None) -> tuple[Path, Path]:
    """Write ``<prefix>.csv`` and the ``<prefix>.json`` sidecar."""
    prefix = str(prefix)
    csv_path, json_path = Path(prefix + ".csv"), Path(prefix + ".json")
    write_text(csv_path, solution_csv(sol))
    write_text(json_path, dumps(solution_record(sol, seed)))
    return csv_path, json_path


def read_solution(prefix) -> RadialSolution:
    """Load a solution written by :func:`write_solution`."""
    prefix = str(prefix)
    meta = read_json(prefix + ".json")
    try:
        problem = AnnulusProblem(**meta["problem"])
        opts = meta["options"]
        opts["junction_grid"] = tuple(opts["junction_grid"])
        options = SolverOptions(**opts)
        junction = Junction(**meta["junction"]) if meta.get("junction") else None
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"{prefix}.json: malformed solution record ({exc})") from None

    rows = {OUTER: [], INNER: []}
    try:
        with open(prefix + ".csv", newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != CSV_HEADER:
                raise ConfigurationError(f"{prefix}.csv: unexpected header {header}")
            for rec in reader:
                if rec[0] not in rows:
                    raise ConfigurationError(f"{prefix}.csv: unknown side {rec[0]!r}")
                rows[rec[0]].append([float(v) for v in rec[1:]])
    except OSError as exc:
        raise ConfigurationError(f"cannot read {prefix}.csv: {exc.strerror}") from None
    except (StopIteration, ValueError) as exc:
        raise ConfigurationError(f"{prefix}.csv: malformed ({exc})") from None

    branches = {}
    for side, data in rows.items():
        if not data:
            raise ConfigurationError(f"{prefix}.csv: no rows for side {side}")
        arr = np.array(data)
        branches[side] = Branch(side, *arr.T.copy())
    return RadialSolution(problem, options, branches[OUTER], branches[INNER], junction, meta.get("stats", {}))


# -- reports ----------------------------------------------------------------

_RELATIONS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    relation: str
    threshold: float
    passed: bool


def check(name: str, value, relation: str, threshold) -> Check:
    value = float(value)
    ok = math.isfinite(value) and _RELATIONS[relation](value, float(threshold))
    return Check(name, value, relation, float(threshold), bool(ok))


@dataclass
class Report:
    command: str
    inputs: dict
    results: dict
    checks: list = field(default_factory=list)
    seed: int | None = None
    flags: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "version": __version__,
            "input_hash": input_hash(self.inputs),
            "seed": self.seed,
            "timestamp": timestamp(),
            "inputs": self.inputs,
            "results": self.results,
            "flags": self.flags,
            "checks": self.checks,
            "passed": self.passed,
        }

    def summary(self) -> str:
        out = [f"{self.command}  (syl {__version__}, input {input_hash(self.inputs)})"]
        for key in sorted(self.results):
            val = self.results[key]
            if isinstance(val, (int, float, str, bool, np.floating)) or val is None:
                out.append(f"  {key:<28} {_short(val) if isinstance(val, (float, np.floating)) else val}")
        for key in sorted(self.flags):
            out.append(f"  {key:<28} {self.flags[key]}")
        if self.checks:
            out.append("  checks:")
            for c in self.checks:
                mark = "PASS" if c.passed else "FAIL"
                out.append(f"    [{mark}] {c.name}: {_short(c.value)} {c.relation} {_short(c.threshold)}")
        out.append(f"  overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(out) + "\n"


def write_report(report: Report, prefix) -> tuple[Path, Path]:
    prefix = str(prefix)
    jp, tp = Path(prefix + ".report.json"), Path(prefix + ".report.txt")
    write_text(jp, dumps(report.to_dict()))
    write_text(tp, report.summary())
    return jp, tp


def write_rows_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    write_text(path, "\n".join(lines) + "\n")
