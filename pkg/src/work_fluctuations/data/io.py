# src/work_fluctuations/data/io.py

import io
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import yaml

from work_fluctuations.data.measure import RECORD_COLUMNS, Dataset
from work_fluctuations.inversion.projection import InversionReport
from work_fluctuations.models.hilbert import PopulationVector, SpectrumTable, peV_to_hz
from work_fluctuations.models.tpm import WorkDistribution
from work_fluctuations.stats.fluctuation import FitResult
from work_fluctuations.utils.errors import DatasetFormatError, ValidationError

FORMAT_NAME = "work-fluctuations"
FORMAT_VERSION = 1
DATASET_COLUMNS = ["record", "observable", "direction", "kT_peV", "index", "value", "stderr"]


def _header(kind: str) -> str:
    return f"# {FORMAT_NAME} {kind} v{FORMAT_VERSION}"


def _prepare(path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_table(frame: pd.DataFrame, path: Path, kind: str, meta: Optional[Dict[str, Any]] = None) -> Path:
    """
    CSV with a versioned header line and optional "# key=value" lines.
    """
    path = _prepare(path)
    with open(path, "w", newline="") as f:
        f.write(_header(kind) + "\n")
        for key, value in (meta or {}).items():
            f.write(f"# {key}={value}\n")
        frame.to_csv(f, index=False, lineterminator="\n")
    print(f"[io] Wrote {kind} ({len(frame)} rows) to {path}")
    return path


def read_table(path: Path, kind: str) -> Tuple[pd.DataFrame, Dict[str, str], int]:
    """
    Returns (frame of strings, header metadata, number of comment lines).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{kind} file not found: {path}")

    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != _header(kind):
        found = lines[0].strip() if lines else "<empty file>"
        raise DatasetFormatError(f"expected header '{_header(kind)}', found '{found}'", line=1)

    meta: Dict[str, str] = {}
    n_comments = 0
    for line in lines:
        if not line.startswith("#"):
            break
        n_comments += 1
        body = line[1:].strip()
        if "=" in body:
            key, value = body.split("=", 1)
            meta[key.strip()] = value.strip()

    body = "\n".join(lines[n_comments:])
    if not body.strip():
        raise DatasetFormatError("no column header after the comment block", line=n_comments + 1)
    frame = pd.read_csv(io.StringIO(body), dtype=str, keep_default_na=False)
    return frame, meta, n_comments


def _float_field(raw: str, line: int, name: str) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise DatasetFormatError(f"'{raw}' is not a number", line=line, field=name) from None
    if math.isnan(value):
        raise DatasetFormatError("value is NaN", line=line, field=name)
    return value


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------

def dataset_frame(ds: Dataset) -> pd.DataFrame:
    rows = []
    for rec in ds.records.itertuples(index=False):
        rows.append({
            "record": "observable",
            "observable": rec.observable,
            "direction": rec.direction,
            "kT_peV": float(rec.kT_peV),
            "index": "",
            "value": float(rec.mean),
            "stderr": float(rec.stderr),
        })
    for (direction, kT), pops in ds.populations.items():
        for k, p in enumerate(pops.probs):
            rows.append({
                "record": "population",
                "observable": "",
                "direction": direction,
                "kT_peV": float(kT),
                "index": k,
                "value": float(p),
                "stderr": "",
            })
    return pd.DataFrame(rows, columns=DATASET_COLUMNS)


def write_dataset(ds: Dataset, path: Path) -> Path:
    meta = {"provenance": ds.provenance, "seed": "" if ds.seed is None else ds.seed}
    return write_table(dataset_frame(ds), path, "dataset", meta)


def read_dataset(path: Path) -> Dataset:
    """
    Parse a dataset CSV, simulated or measured. Every malformed record raises
    DatasetFormatError naming its line and field.
    """
    frame, meta, n_comments = read_table(path, "dataset")
    missing = [c for c in DATASET_COLUMNS if c not in frame.columns]
    if missing:
        raise DatasetFormatError(f"missing columns {missing}", line=n_comments + 1)

    records: List[dict] = []
    record_lines: List[int] = []
    pop_values: Dict[Tuple[str, float], Dict[int, float]] = {}

    for row_idx, row in enumerate(frame.itertuples(index=False)):
        line = n_comments + 2 + row_idx
        if row.direction not in ("forward", "backward"):
            raise DatasetFormatError(f"direction must be forward or backward, got '{row.direction}'",
                                     line=line, field="direction")
        kT = _float_field(row.kT_peV, line, "kT_peV")
        if not kT > 0:
            raise DatasetFormatError(f"kT_peV must be > 0, got {kT}", line=line, field="kT_peV")
        value = _float_field(row.value, line, "value")

        if row.record == "observable":
            if not row.observable:
                raise DatasetFormatError("observable name is empty", line=line, field="observable")
            stderr = _float_field(row.stderr or "0", line, "stderr")
            if stderr < 0:
                raise DatasetFormatError(f"stderr must be >= 0, got {stderr}", line=line, field="stderr")
            if abs(value) > 1 + 3 * stderr:
                raise DatasetFormatError(f"|mean| = {abs(value)} exceeds 1 + 3*stderr", line=line, field="value")
            records.append({"observable": row.observable, "direction": row.direction,
                            "kT_peV": kT, "mean": value, "stderr": stderr})
            record_lines.append(line)
        elif row.record == "population":
            try:
                k = int(row.index)
            except ValueError:
                raise DatasetFormatError(f"'{row.index}' is not a level index", line=line, field="index") from None
            if not 0 <= value <= 1:
                raise DatasetFormatError(f"population {value} outside [0, 1]", line=line, field="value")
            slot = pop_values.setdefault((row.direction, kT), {})
            if k in slot:
                raise DatasetFormatError(f"duplicate population index {k}", line=line, field="index")
            slot[k] = value
        else:
            raise DatasetFormatError(f"record must be observable or population, got '{row.record}'",
                                     line=line, field="record")

    populations: Dict[Tuple[str, float], PopulationVector] = {}
    for key, slot in pop_values.items():
        if sorted(slot) != list(range(len(slot))):
            raise DatasetFormatError(f"population indices for {key} are not 0..{len(slot) - 1}", field="index")
        values = np.array([slot[k] for k in range(len(slot))])
        try:
            populations[key] = PopulationVector(values, kT_peV=key[1])
        except ValidationError:
            populations[key] = PopulationVector.normalized(values, kT_peV=key[1])

    for rec, line in zip(records, record_lines):
        if (rec["direction"], rec["kT_peV"]) not in populations:
            raise DatasetFormatError(
                f"no populations for {rec['direction']} at kT={rec['kT_peV']} peV", line=line, field="kT_peV"
            )

    seed = meta.get("seed", "")
    ds = Dataset(
        pd.DataFrame(records, columns=RECORD_COLUMNS),
        populations,
        provenance=meta.get("provenance", "measured") or "measured",
        seed=int(seed) if seed else None,
    )
    print(f"[io] Loaded {len(records)} records and {len(populations)} population vectors from {path}")
    return ds


# ---------------------------------------------------------------------------
# Inversion report
# ---------------------------------------------------------------------------

def _as_list(a) -> Any:
    return None if a is None else np.asarray(a, dtype=float).tolist()


def _opt_float(x) -> Optional[float]:
    return None if x is None else float(x)


def inversion_document(reports: Dict[str, InversionReport], spec: SpectrumTable) -> Dict[str, Any]:
    return {
        "format": f"{FORMAT_NAME}/inversion",
        "version": FORMAT_VERSION,
        "spectrum": {
            "energies_hz": _as_list(spec.energies),
            "labels": [spec.label_string(k) for k in range(spec.dimension)],
        },
        "directions": {
            direction: {
                "raw_solution": _as_list(r.raw_solution),
                "raw_matrix": _as_list(r.raw_matrix),
                "projected": _as_list(r.projected.p),
                "iterations": int(r.iterations),
                "converged": bool(r.converged),
                "change": float(r.change),
                "residual": _opt_float(r.residual),
                "rank": None if r.rank is None else int(r.rank),
                "condition_number": _opt_float(r.condition_number),
                "clamped_entries": int(r.clamped_entries),
                "flags": list(r.flags),
            }
            for direction, r in reports.items()
        },
    }


def write_inversion(reports: Dict[str, InversionReport], spec: SpectrumTable, path: Path) -> Path:
    path = _prepare(path)
    with open(path, "w") as f:
        yaml.safe_dump(inversion_document(reports, spec), f, sort_keys=False)
    print(f"[io] Wrote inversion report for {list(reports)} to {path}")
    return path


def _read_yaml(path: Path, kind: str) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{kind} file not found: {path}")
    with open(path, "r") as f:
        doc = yaml.safe_load(f)
    if not isinstance(doc, dict):
        raise DatasetFormatError(f"{path} is not a {kind} document")
    if doc.get("format") != f"{FORMAT_NAME}/{kind}":
        raise DatasetFormatError(f"expected format '{FORMAT_NAME}/{kind}', got '{doc.get('format')}'", field="format")
    if doc.get("version") != FORMAT_VERSION:
        raise DatasetFormatError(f"unsupported version {doc.get('version')}", field="version")
    return doc


def read_inversion(path: Path) -> Dict[str, Dict[str, Any]]:
    """
    direction -> report fields, with matrices as numpy arrays.
    """
    doc = _read_yaml(path, "inversion")
    directions = doc.get("directions") or {}
    out = {}
    for direction, entry in directions.items():
        if direction not in ("forward", "backward"):
            raise DatasetFormatError(f"unknown direction '{direction}'", field="directions")
        for key in ("raw_matrix", "projected"):
            if key not in entry:
                raise DatasetFormatError(f"{direction} entry has no '{key}'", field=key)
        item = dict(entry)
        item["raw_matrix"] = np.array(entry["raw_matrix"], dtype=float)
        item["projected"] = np.array(entry["projected"], dtype=float)
        if entry.get("raw_solution") is not None:
            item["raw_solution"] = np.array(entry["raw_solution"], dtype=float)
        out[direction] = item
    print(f"[io] Loaded inversion report for {list(out)} from {path}")
    return out


# ---------------------------------------------------------------------------
# Work distributions, fits, flat tables
# ---------------------------------------------------------------------------

def write_workdist(dist: WorkDistribution, path: Path) -> Path:
    meta = {"direction": dist.direction, "kT_peV": dist.kT_peV}
    return write_table(dist.to_frame(), path, "workdist", meta)


def read_workdist(path: Path) -> WorkDistribution:
    frame, meta, n_comments = read_table(path, "workdist")
    for col in ("W_hz", "probability"):
        if col not in frame.columns:
            raise DatasetFormatError(f"missing column '{col}'", line=n_comments + 1, field=col)

    work, prob = [], []
    for row_idx, (w, p) in enumerate(zip(frame["W_hz"], frame["probability"])):
        line = n_comments + 2 + row_idx
        work.append(_float_field(w, line, "W_hz"))
        prob.append(_float_field(p, line, "probability"))

    direction = meta.get("direction", "forward")
    if direction not in ("forward", "backward"):
        raise DatasetFormatError(f"unknown direction '{direction}'", field="direction")
    raw_kT = meta.get("kT_peV", "")
    kT = None if raw_kT in ("", "None") else _float_field(raw_kT, 1, "kT_peV")
    return WorkDistribution(
        np.array(work),
        np.array(prob),
        direction=direction,
        kT_peV=kT,
        kT_hz=None if kT is None else float(peV_to_hz(kT)),
    )


def fit_document(fit: FitResult, temperature: int, meta: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    doc = {
        "format": f"{FORMAT_NAME}/fit",
        "version": FORMAT_VERSION,
        "temperature": int(temperature),
        "slope_per_peV": float(fit.slope),
        "intercept": float(fit.intercept),
        "slope_stderr": float(fit.slope_stderr),
        "intercept_stderr": float(fit.intercept_stderr),
        "kT_peV": float(fit.kT_peV),
        "kT_stderr": float(fit.kT_stderr),
        "confidence": float(fit.confidence),
        "weighted": bool(fit.weighted),
        "n_points": int(fit.n_points),
        "excluded_W_peV": [float(w) for w in fit.excluded],
        "residuals": _as_list(fit.residuals),
    }
    doc.update(meta or {})
    return doc


def write_fit(fit: FitResult, temperature: int, path: Path, meta: Optional[Dict[str, Any]] = None) -> Path:
    path = _prepare(path)
    with open(path, "w") as f:
        yaml.safe_dump(fit_document(fit, temperature, meta), f, sort_keys=False)
    print(f"[io] Wrote fit T{temperature} (kT = {fit.kT_peV:.3f} peV) to {path}")
    return path


def read_fit(path: Path) -> Dict[str, Any]:
    return _read_yaml(path, "fit")


def write_uncertainty(frame: pd.DataFrame, path: Path, meta: Optional[Dict[str, Any]] = None) -> Path:
    return write_table(frame, path, "uncertainty", meta)


def read_uncertainty(path: Path) -> pd.DataFrame:
    frame, _, _ = read_table(path, "uncertainty")
    for col in ("temperature", "count"):
        frame[col] = frame[col].astype(int)
    for col in ("W_peV", "mean", "std"):
        frame[col] = pd.to_numeric(frame[col].replace("", np.nan))
    return frame
