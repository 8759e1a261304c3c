"""
CSV emission and parsing for result tables, shot records and calibration records.

Cells are written with repr() for floats, str() for ints and booleans, and the
empty string for missing values, so load_csv restores the in-memory table.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from ..errors import InvalidStateError
from .mitigation import CalibrationPoint, CalibrationRecord
from .qpu import ShotRecord

CALIBRATION_COLUMNS = ["variant", "point_index", "chi_c", "contamination", "epsilon_s", "epsilon_clamped"]


@dataclass
class ResultTable:
    columns: List[str]
    rows: List[Dict[str, Any]] = field(default_factory=list)

    def add_row(self, **values) -> None:
        unknown = set(values) - set(self.columns)
        if unknown:
            raise KeyError(f"unknown columns: {sorted(unknown)}")
        self.rows.append({c: values.get(c) for c in self.columns})

    def column(self, name: str) -> List[Any]:
        return [row[name] for row in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_cell(text: str) -> Any:
    if text == "":
        return None
    if text in ("True", "False"):
        return text == "True"
    for convert in (int, float):
        try:
            return convert(text)
        except ValueError:
            pass
    return text


def emit_csv(table: ResultTable, path: Path) -> Path:
    """Write a header row plus one row per table row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_format_cell(row.get(c)) for c in table.columns])
    return path


def load_csv(path: Path) -> ResultTable:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        columns = next(reader)
        rows = [dict(zip(columns, (_parse_cell(cell) for cell in line))) for line in reader]
    return ResultTable(columns, rows)


def write_shot_record_csv(rec: ShotRecord, path: Path) -> Path:
    if rec.is_exact:
        raise InvalidStateError("a shot-free record has no counts to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["bitstring", "count"])
        for bits in sorted(rec.counts):
            writer.writerow([bits, rec.counts[bits]])
    return path


def read_shot_record_csv(path: Path) -> ShotRecord:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        # bitstrings stay text so leading zeros survive
        counts = {row["bitstring"]: int(row["count"]) for row in reader}
    return ShotRecord(counts, sum(counts.values()))


def calibration_table(record: CalibrationRecord) -> ResultTable:
    table = ResultTable(list(CALIBRATION_COLUMNS))
    for p in record.points:
        table.add_row(
            variant=record.variant,
            point_index=p.point_index,
            chi_c=p.chi_c,
            contamination=float(p.contamination),
            epsilon_s=float(p.epsilon_s) if p.calibrated else None,
            epsilon_clamped=p.clamped_epsilon if p.calibrated else None,
        )
    return table


def write_calibration_csv(record: CalibrationRecord, path: Path) -> Path:
    return emit_csv(calibration_table(record), path)


def read_calibration_points(path: Path) -> List[CalibrationPoint]:
    table = load_csv(path)
    return [
        CalibrationPoint(
            point_index=row["point_index"],
            chi_c=row["chi_c"],
            contamination=float(row["contamination"]),
            epsilon_s=float("nan") if row["epsilon_s"] is None else float(row["epsilon_s"]),
            calibrated=row["epsilon_s"] is not None,
        )
        for row in table.rows
    ]
