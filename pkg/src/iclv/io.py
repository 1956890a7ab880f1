"""File formats: dataset CSVs and JSON documents for parameters, specs and settings.

Every file carries a schema version. Datasets are two CSV files: one row
per (respondent, task, alternative) in ``<stem>.csv`` and one row per
respondent in ``<stem>_individuals.csv``. Numeric CSV fields use 17
significant digits so a write/read cycle is lossless.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import ConfigurationError, ICLVError, InputError
from .model import (
    LATENTS, N_LEVELS, NUMERIC_ATTRIBUTES, UNITS, AlternativeAttributes, ChoiceDataset,
    CovariateVector, Individual, Interaction, MeasurementParams, ModelSpec, ParameterSet, Task,
)

SCHEMA_VERSION = 1
CHOICE_COLUMNS = ("individual", "task", "alternative", "chosen", "body_type") + NUMERIC_ATTRIBUTES
PERSON_COLUMNS = ("id", "block", "budget_band", "age", "female", "education", "employment",
                  "household", "vehicles", "income", "dwelling", "tenure")
ALT_CODES = {1: 0, 2: 1, 3: 2}  # file alternative number -> Task.chosen code


def fmt(value: float) -> str:
    return format(float(value), ".17g")


def units_block() -> dict:
    out = {name: {"divisor": d, "unit": u} for name, (d, u) in UNITS.items()}
    out["age"] = {"divisor": 100.0, "unit": "years"}
    return out


# ---------------------------------------------------------------------------
# JSON documents
# ---------------------------------------------------------------------------

def _dump(path: Path, data: Mapping) -> None:
    Path(path).write_text(json.dumps(data, indent=2, allow_nan=False) + "\n")


def read_json(path, kind: str | None = None) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read file: {exc.strerror}", path) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(exc.msg, path, exc.lineno, exc.colno) from None
    if not isinstance(data, dict):
        raise InputError("top-level JSON value must be an object", path, 1, 1)
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise InputError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})", path)
    if kind is not None and data.get("kind") != kind:
        raise InputError(f"expected a {kind!r} document, found kind {data.get('kind')!r}", path)
    return data


def params_to_dict(params: ParameterSet, calibration: Mapping | None = None) -> dict:
    meas = params.measurement
    out: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "kind": "params",
        "units": units_block(),
        "covariates": list(params.covariates),
        "structural": {latent: {c: float(params.A[l, j]) for j, c in enumerate(params.covariates)}
                       for l, latent in enumerate(LATENTS)},
        "delta_scale": None if params.delta_scale is None else
        {latent: float(v) for latent, v in zip(LATENTS, params.delta_scale)},
        "beta": dict(params.beta),
        "interactions": [{"latent": i.latent, "attribute": i.attribute, "coefficient": i.coefficient}
                         for i in params.interactions],
        "measurement": None if meas is None else {"indicators": [
            {"name": n, "latent": LATENTS[meas.latent_index[k]], "loading": float(meas.loadings[k]),
             "thresholds": [float(t) for t in meas.thresholds[k]]} for k, n in enumerate(meas.names)]},
        "asc": params.asc,
    }
    if calibration:
        out["calibration"] = dict(calibration)
    return out


def params_from_dict(data: Mapping, path=None) -> ParameterSet:
    try:
        covs = list(data["covariates"])
        A = np.array([[float(data["structural"][latent][c]) for c in covs] for latent in LATENTS])
        ds = data.get("delta_scale")
        delta = None if ds is None else np.array([float(ds[latent]) for latent in LATENTS])
        meas = None
        if data.get("measurement"):
            rows = data["measurement"]["indicators"]
            meas = MeasurementParams([r["name"] for r in rows], [LATENTS.index(r["latent"]) for r in rows],
                                     [float(r["loading"]) for r in rows], [r["thresholds"] for r in rows])
        inter = [Interaction(i["latent"], i["attribute"], float(i["coefficient"]))
                 for i in data.get("interactions", [])]
        return ParameterSet(covs, A, delta, {k: float(v) for k, v in data["beta"].items()}, inter,
                            meas, float(data.get("asc", 0.0)))
    except KeyError as exc:
        raise InputError(f"missing field {exc.args[0]!r}", path) from None
    except ValueError as exc:
        raise InputError(str(exc), path) from None
    except ConfigurationError as exc:
        raise InputError(str(exc), path) from None


def write_params(path, params: ParameterSet, calibration: Mapping | None = None) -> None:
    _dump(path, params_to_dict(params, calibration))


def read_params(path) -> tuple[ParameterSet, dict]:
    """Parameters plus the (possibly empty) calibration block."""
    data = read_json(path, "params")
    return params_from_dict(data, path), dict(data.get("calibration") or {})


def write_spec(path, spec: ModelSpec) -> None:
    _dump(path, {"schema_version": SCHEMA_VERSION, "kind": "model_spec", **spec.to_dict()})


def read_spec(path) -> ModelSpec:
    data = read_json(path, "model_spec")
    try:
        return ModelSpec.from_dict(data)
    except KeyError as exc:
        raise InputError(f"missing field {exc.args[0]!r}", path) from None


def write_settings(path, settings) -> None:
    _dump(path, {"schema_version": SCHEMA_VERSION, "kind": "estimation_settings", **settings.to_dict()})


def read_settings(path):
    from .estimation import EstimationSettings

    data = read_json(path, "estimation_settings")
    body = {k: v for k, v in data.items() if k not in ("schema_version", "kind")}
    unknown = set(body) - set(EstimationSettings.__dataclass_fields__)
    if unknown:
        raise InputError(f"unknown settings field {sorted(unknown)[0]!r}", path)
    try:
        return EstimationSettings.from_dict(body)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc), path) from None


def write_result(path, result) -> None:
    _dump(path, result.to_dict())


def write_design_spec(path, spec) -> None:
    _dump(path, {"schema_version": SCHEMA_VERSION, "kind": "design_spec", **spec.to_dict()})


def read_design_spec(path):
    from .synthetic import DesignSpec

    data = read_json(path, "design_spec")
    try:
        return DesignSpec.from_dict(data)
    except KeyError as exc:
        raise InputError(f"missing field {exc.args[0]!r}", path) from None


def write_priors(path, beta: Mapping[str, float]) -> None:
    _dump(path, {"schema_version": SCHEMA_VERSION, "kind": "priors", "beta": dict(beta)})


def read_priors(path) -> dict[str, float]:
    data = read_json(path, "priors")
    return {k: float(v) for k, v in data.get("beta", {}).items()}


def write_cohorts(path, cohorts) -> None:
    _dump(path, {"schema_version": SCHEMA_VERSION, "kind": "cohorts",
                 "cohorts": [c.to_dict() for c in cohorts]})


def read_cohorts(path):
    from .policy import CohortSpec

    data = read_json(path, "cohorts")
    try:
        return tuple(CohortSpec.from_dict(c) for c in data["cohorts"])
    except KeyError as exc:
        raise InputError(f"missing field {exc.args[0]!r}", path) from None
    except (TypeError, ConfigurationError) as exc:
        raise InputError(str(exc), path) from None


# ---------------------------------------------------------------------------
# Dataset CSVs
# ---------------------------------------------------------------------------

def individuals_path(path) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}_individuals{path.suffix}")


def _header_lines(extra: Mapping[str, Any]) -> str:
    lines = [f"# schema_version: {SCHEMA_VERSION}"] + [f"# {k}: {v}" for k, v in extra.items()]
    return "\n".join(lines) + "\n"


def dataset_to_csv(dataset: ChoiceDataset) -> tuple[str, str]:
    """Text of the choice file and the respondent file."""
    meta = {"panel_length": dataset.panel_length, "units": "model units (see the params units block)"}
    choices = _io.StringIO()
    choices.write(_header_lines({"kind": "choices", **meta}))
    w = csv.writer(choices, lineterminator="\n")
    w.writerow(CHOICE_COLUMNS)
    people = _io.StringIO()
    people.write(_header_lines({"kind": "individuals", **meta}))
    pw = csv.writer(people, lineterminator="\n")
    pw.writerow(PERSON_COLUMNS + dataset.indicator_names)
    for p in dataset.sorted_by_id():
        z = p.covariates
        pw.writerow([p.id, "" if p.block is None else p.block, "" if p.budget_band is None else p.budget_band,
                     fmt(z.age), int(z.female), z.education, z.employment, z.household, z.vehicles,
                     z.income, z.dwelling, z.tenure] + ["" if v is None else v for v in p.indicators])
        for t, task in enumerate(p.tasks, start=1):
            for a, alt in enumerate((task.alt1, task.alt2), start=1):
                w.writerow([p.id, t, a, int(task.chosen == a - 1), alt.body_type]
                           + [fmt(getattr(alt, n)) for n in NUMERIC_ATTRIBUTES])
            w.writerow([p.id, t, 3, int(task.chosen == 2), ""] + [""] * len(NUMERIC_ATTRIBUTES))
    return choices.getvalue(), people.getvalue()


def write_dataset(path, dataset: ChoiceDataset) -> tuple[Path, Path]:
    path = Path(path)
    choices, people = dataset_to_csv(dataset)
    path.write_text(choices)
    other = individuals_path(path)
    other.write_text(people)
    return path, other


def _read_rows(path: Path):
    """Yields ``(line_number, meta, header, rows)``; comments precede the header."""
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read file: {exc.strerror}", path) from None
    lines = text.splitlines()
    meta = {}
    first = 0
    while first < len(lines) and lines[first].startswith("#"):
        key, _, value = lines[first][1:].partition(":")
        meta[key.strip()] = value.strip()
        first += 1
    if meta.get("schema_version") != str(SCHEMA_VERSION):
        raise InputError(f"missing or unsupported schema_version (expected {SCHEMA_VERSION})", path, 1)
    reader = csv.reader(lines[first:])
    try:
        header = next(reader)
    except StopIteration:
        raise InputError("missing header row", path, first + 1) from None
    rows = [(first + 1 + i, row) for i, row in enumerate(reader, start=1) if row]
    return meta, header, rows, first + 1


def _int(value: str, path, line, col, name) -> int:
    try:
        return int(value)
    except ValueError:
        raise InputError(f"{name} must be an integer, got {value!r}", path, line, col) from None


def _float(value: str, path, line, col, name) -> float:
    try:
        out = float(value)
    except ValueError:
        raise InputError(f"{name} must be a number, got {value!r}", path, line, col) from None
    if not math.isfinite(out):
        raise InputError(f"{name} must be finite", path, line, col)
    return out


def read_dataset(path) -> ChoiceDataset:
    """Parse a dataset; errors name the file, line and column."""
    path = Path(path)
    ppath = individuals_path(path)
    meta, header, rows, hline = _read_rows(ppath)
    if tuple(header[:len(PERSON_COLUMNS)]) != PERSON_COLUMNS:
        raise InputError(f"respondent header must start with {','.join(PERSON_COLUMNS)}", ppath, hline)
    indicator_names = tuple(header[len(PERSON_COLUMNS):])
    try:
        panel_length = int(meta.get("panel_length", "8"))
    except ValueError:
        raise InputError("panel_length must be an integer", ppath, 1) from None
    persons = {}
    for line, row in rows:
        if len(row) != len(header):
            raise InputError(f"expected {len(header)} fields, found {len(row)}", ppath, line)
        pid = _int(row[0], ppath, line, 1, "id")
        if pid < 0:
            raise InputError("id must be a non-negative integer", ppath, line, 1)
        if pid in persons:
            raise InputError(f"duplicate respondent id {pid}", ppath, line, 1)
        block = None if row[1] == "" else _int(row[1], ppath, line, 2, "block")
        band = None if row[2] == "" else _int(row[2], ppath, line, 3, "budget_band")
        try:
            z = CovariateVector(age=_float(row[3], ppath, line, 4, "age"),
                                female=_int(row[4], ppath, line, 5, "female"),
                                **dict(zip(PERSON_COLUMNS[5:], row[5:len(PERSON_COLUMNS)])))
        except ConfigurationError as exc:
            raise InputError(str(exc), ppath, line) from None
        answers = []
        for c, value in enumerate(row[len(PERSON_COLUMNS):], start=len(PERSON_COLUMNS) + 1):
            if value == "":
                answers.append(None)
                continue
            level = _int(value, ppath, line, c, "indicator level")
            if not 1 <= level <= N_LEVELS:
                raise InputError(f"indicator level must be in 1..{N_LEVELS}, got {level}", ppath, line, c)
            answers.append(level)
        persons[pid] = (z, tuple(answers), block, band, line)

    meta_c, header_c, rows_c, hline_c = _read_rows(path)
    if tuple(header_c) != CHOICE_COLUMNS:
        raise InputError(f"choice header must be {','.join(CHOICE_COLUMNS)}", path, hline_c)
    tasks: dict[int, dict[int, dict[int, tuple]]] = {}
    for line, row in rows_c:
        if len(row) != len(CHOICE_COLUMNS):
            raise InputError(f"expected {len(CHOICE_COLUMNS)} fields, found {len(row)}", path, line)
        pid = _int(row[0], path, line, 1, "individual")
        if pid not in persons:
            raise InputError(f"respondent {pid} is not in {ppath.name}", path, line, 1)
        t = _int(row[1], path, line, 2, "task")
        a = _int(row[2], path, line, 3, "alternative")
        if a not in ALT_CODES:
            raise InputError("alternative must be 1, 2 or 3", path, line, 3)
        chosen = _int(row[3], path, line, 4, "chosen")
        if chosen not in (0, 1):
            raise InputError("chosen must be 0 or 1", path, line, 4)
        alt = None
        if a != 3:
            values = {n: _float(v, path, line, c, n)
                      for c, (n, v) in enumerate(zip(NUMERIC_ATTRIBUTES, row[5:]), start=6)}
            try:
                alt = AlternativeAttributes(body_type=row[4], **values)
            except ConfigurationError as exc:
                raise InputError(str(exc), path, line) from None
        elif any(row[4:]):
            raise InputError("the opt-out row must leave attribute fields empty", path, line)
        slot = tasks.setdefault(pid, {}).setdefault(t, {})
        if a in slot:
            raise InputError(f"duplicate row for respondent {pid}, task {t}, alternative {a}", path, line)
        slot[a] = (alt, chosen, line)

    people = []
    for pid, (z, answers, block, band, pline) in persons.items():
        own = tasks.get(pid, {})
        if sorted(own) != list(range(1, panel_length + 1)):
            raise InputError(f"respondent {pid} must have tasks 1..{panel_length}", path, pline)
        built = []
        for t in range(1, panel_length + 1):
            slot = own[t]
            if sorted(slot) != [1, 2, 3]:
                raise InputError(f"respondent {pid}, task {t} needs alternatives 1, 2 and 3", path,
                                 max(v[2] for v in slot.values()))
            picked = [a for a in (1, 2, 3) if slot[a][1] == 1]
            if len(picked) != 1:
                raise InputError(f"respondent {pid}, task {t} must have exactly one chosen row", path,
                                 slot[3][2])
            built.append(Task(slot[1][0], slot[2][0], ALT_CODES[picked[0]]))
        people.append(Individual(pid, z, answers, tuple(built), block, band))
    extra = set(tasks) - set(persons)
    if extra:
        raise InputError(f"respondent {min(extra)} has tasks but no respondent row", path)
    try:
        return ChoiceDataset(people, panel_length=panel_length, indicator_names=indicator_names)
    except ConfigurationError as exc:
        raise InputError(str(exc), path) from None


# ---------------------------------------------------------------------------
# Designs
# ---------------------------------------------------------------------------

def design_to_csv(design) -> str:
    from .synthetic import DESIGN_ATTRIBUTES

    out = _io.StringIO()
    out.write(_header_lines({"kind": "design", "levels": "0-based level indices into the design spec"}))
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("task", "block", "alternative") + DESIGN_ATTRIBUTES)
    for t in range(design.n_tasks):
        for j in range(2):
            w.writerow([t + 1, int(design.blocks[t]), j + 1] + [int(v) for v in design.levels[t, j]])
    return out.getvalue()


def write_design(path, design) -> None:
    Path(path).write_text(design_to_csv(design))


def read_design(path, spec):
    from .synthetic import DESIGN_ATTRIBUTES, Design

    path = Path(path)
    _, header, rows, hline = _read_rows(path)
    expected = ("task", "block", "alternative") + DESIGN_ATTRIBUTES
    if tuple(header) != expected:
        raise InputError(f"design header must be {','.join(expected)}", path, hline)
    if len(rows) % 2:
        raise InputError("every task needs two rows", path)
    levels = np.zeros((len(rows) // 2, 2, len(DESIGN_ATTRIBUTES)), dtype=np.int64)
    blocks = np.zeros(len(rows) // 2, dtype=np.int64)
    for i, (line, row) in enumerate(rows):
        if len(row) != len(expected):
            raise InputError(f"expected {len(expected)} fields, found {len(row)}", path, line)
        vals = [_int(v, path, line, c, expected[c - 1]) for c, v in enumerate(row, start=1)]
        t, j = i // 2, i % 2
        if vals[0] != t + 1 or vals[2] != j + 1:
            raise InputError("rows must be ordered by task then alternative", path, line)
        blocks[t] = vals[1]
        levels[t, j] = vals[3:]
    try:
        return Design(spec, levels, blocks)
    except ConfigurationError as exc:
        raise InputError(str(exc), path) from None


# ---------------------------------------------------------------------------
# Manifests, bundled data and validation
# ---------------------------------------------------------------------------

def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, command: str, inputs: Iterable, seeds: Mapping, settings: Mapping,
                   outputs: Iterable, wall_clock: float, extra: Mapping | None = None) -> None:
    from . import __version__

    data = {
        "schema_version": SCHEMA_VERSION, "kind": "manifest", "command": command,
        "inputs": [{"path": str(p), "sha256": sha256(p)} for p in inputs],
        "seeds": dict(seeds), "settings": dict(settings),
        "outputs": [str(p) for p in outputs], "tool_version": __version__,
        "wall_clock_seconds": wall_clock,
    }
    if extra:
        data.update(extra)
    _dump(path, data)


def data_path(name: str) -> Path:
    """Path of a file bundled in the package's data directory."""
    return Path(str(resources.files("iclv") / "data" / name))


def reference_params() -> tuple[ParameterSet, dict]:
    return read_params(data_path("reference_params.json"))


_READERS = {
    "params": read_params, "model_spec": read_spec, "estimation_settings": read_settings,
    "design_spec": read_design_spec, "priors": read_priors, "cohorts": read_cohorts,
}


def validate(path) -> list[str]:
    """Schema findings for any supported file; an empty list means the file is valid."""
    path = Path(path)
    try:
        if path.suffix == ".json":
            data = read_json(path)
            kind = data.get("kind")
            if kind in _READERS:
                _READERS[kind](path)
            elif kind not in ("estimation_result", "manifest", "design_report", "sweep_manifest"):
                return [f"{path}: unknown document kind {kind!r}"]
        elif path.suffix == ".csv":
            meta, _, _, _ = _read_rows(path)
            kind = meta.get("kind")
            if kind in ("choices", "individuals"):
                target = path if kind == "choices" else path.with_name(path.name.replace("_individuals", ""))
                read_dataset(target)
            elif kind == "design":
                from .synthetic import DesignSpec

                read_design(path, DesignSpec(n_tasks=_design_rows(path), n_blocks=1,
                                             tasks_per_respondent=_design_rows(path)))
            elif kind != "curves":
                return [f"{path}: unknown CSV kind {kind!r}"]
        else:
            return [f"{path}: unsupported file type {path.suffix!r}"]
    except ICLVError as exc:
        return [str(exc)]
    return []


def _design_rows(path) -> int:
    _, _, rows, _ = _read_rows(Path(path))
    return max(len(rows) // 2, 1)
