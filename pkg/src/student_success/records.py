"""Student records, enrollment timelines, exclusion and validation.

A raw value is ``None`` (missing), a finite ``float`` or a non-empty ``str``
(category).  Records are JSON-Lines interchangeable.
"""

from __future__ import annotations

import datetime as dt
import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Iterable, Iterator, Union

from .catalog import FeatureCatalog, Kind, Temporality

RawValue = Union[None, float, str]


class RecordError(ValueError):
    pass


class Exclusion(str, enum.Enum):
    Military = "Military"
    Deceased = "Deceased"


def check_raw(value) -> RawValue:
    if value is None:
        return None
    if isinstance(value, bool):
        return float(value)
    if isinstance(value, (int, float)):
        v = float(value)
        if not math.isfinite(v):
            raise RecordError(f"numeric value must be finite, got {value!r}")
        return v
    if isinstance(value, str):
        if not value:
            raise RecordError("category value must be non-empty")
        return value
    raise RecordError(f"unsupported raw value {value!r}")


@dataclass(frozen=True)
class SemesterSlice:
    index: int
    values: dict[str, RawValue] = field(default_factory=dict)


@dataclass(frozen=True)
class YearSlice:
    index: int
    values: dict[str, RawValue] = field(default_factory=dict)


@dataclass(frozen=True)
class EnrollmentTimeline:
    first_enrollment: dt.date
    last_enrollment: dt.date
    degree_awarded_at_origin: bool = False
    reappearance_date: dt.date | None = None
    destination_graduated: bool = False
    origin_program_level: int = 2
    destination_program_level: int | None = None

    def __post_init__(self):
        if self.last_enrollment < self.first_enrollment:
            raise RecordError("last_enrollment precedes first_enrollment")
        if self.reappearance_date is not None:
            if self.reappearance_date <= self.last_enrollment:
                raise RecordError("reappearance_date must be after last_enrollment")
        elif self.destination_graduated or self.destination_program_level is not None:
            raise RecordError("destination fields require a reappearance_date")
        for level in (self.origin_program_level, self.destination_program_level):
            if level is not None and not 0 <= level <= 4:
                raise RecordError(f"program level {level} outside 0..4")


@dataclass(frozen=True)
class StudentRecord:
    """One student.  ``declarations`` holds the raw, possibly conflicting,
    per-form declarations of nominally fixed categorical features."""

    student_id: str
    fixed: dict[str, RawValue]
    semesters: tuple[SemesterSlice, ...]
    years: tuple[YearSlice, ...]
    timeline: EnrollmentTimeline
    has_fafsa: bool = True
    excluded: Exclusion | None = None
    declarations: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for name, slices in (("semester", self.semesters), ("year", self.years)):
            for expected, s in enumerate(slices, start=1):
                if s.index != expected:
                    raise RecordError(
                        f"{self.student_id}: {name} indices must increase from 1, got {s.index} at position {expected}"
                    )

    def replace(self, **changes) -> "StudentRecord":
        return replace(self, **changes)


def exclude_ineligible(records: Iterable[StudentRecord]) -> tuple[list[StudentRecord], list[StudentRecord]]:
    """Split off military and deceased students; order of both lists is preserved."""
    kept, dropped = [], []
    for r in records:
        (dropped if r.excluded is not None else kept).append(r)
    return kept, dropped


@dataclass(frozen=True)
class Finding:
    kind: str  # "unknown-feature" | "temporality-mismatch" | "impossible-value" | "kind-mismatch"
    feature: str
    where: str
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    student_id: str
    findings: tuple[Finding, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.findings)

    def __len__(self) -> int:
        return len(self.findings)

    def of_kind(self, kind: str) -> list[Finding]:
        return [f for f in self.findings if f.kind == kind]


def _check_values(values, expected, where, catalog, findings):
    for fid, value in values.items():
        spec = catalog.get(fid)
        if spec is None:
            findings.append(Finding("unknown-feature", fid, where))
            continue
        if spec.temporality is not expected:
            findings.append(Finding("temporality-mismatch", fid, where,
                                    f"declared {spec.temporality.value}, found in {expected.value}"))
        if value is None:
            continue
        if isinstance(value, str):
            if spec.kind is not Kind.Categorical:
                findings.append(Finding("kind-mismatch", fid, where, f"category {value!r} for {spec.kind.value}"))
        elif spec.kind is Kind.Categorical:
            findings.append(Finding("kind-mismatch", fid, where, f"number {value!r} for Categorical"))
        elif not spec.in_range(value):
            findings.append(Finding("impossible-value", fid, where,
                                    f"{value!r} outside {spec.possible_range}"))


def validate_record(record: StudentRecord, catalog: FeatureCatalog) -> ValidationReport:
    """List unknown ids, temporality mismatches and impossible values.  Never raises."""
    findings: list[Finding] = []
    _check_values(record.fixed, Temporality.Fixed, "fixed", catalog, findings)
    for s in record.semesters:
        _check_values(s.values, Temporality.PerSemester, f"semester {s.index}", catalog, findings)
    for y in record.years:
        _check_values(y.values, Temporality.PerYear, f"year {y.index}", catalog, findings)
    for fid in record.declarations:
        if fid not in catalog:
            findings.append(Finding("unknown-feature", fid, "declarations"))
    return ValidationReport(record.student_id, tuple(findings))


# --- JSON-Lines interchange -------------------------------------------------

def _date(text):
    return None if text is None else dt.date.fromisoformat(text)


def record_to_dict(r: StudentRecord) -> dict:
    t = r.timeline
    return {
        "student_id": r.student_id,
        "fixed": dict(r.fixed),
        "semesters": [{"index": s.index, "values": dict(s.values)} for s in r.semesters],
        "years": [{"index": y.index, "values": dict(y.values)} for y in r.years],
        "timeline": {
            "first_enrollment": t.first_enrollment.isoformat(),
            "last_enrollment": t.last_enrollment.isoformat(),
            "degree_awarded_at_origin": t.degree_awarded_at_origin,
            "reappearance_date": None if t.reappearance_date is None else t.reappearance_date.isoformat(),
            "destination_graduated": t.destination_graduated,
            "origin_program_level": t.origin_program_level,
            "destination_program_level": t.destination_program_level,
        },
        "has_fafsa": r.has_fafsa,
        "excluded": None if r.excluded is None else r.excluded.value,
        "declarations": {k: list(v) for k, v in r.declarations.items()},
    }


def record_from_dict(d: dict) -> StudentRecord:
    def vals(m):
        return {k: check_raw(v) for k, v in m.items()}

    t = d["timeline"]
    return StudentRecord(
        student_id=str(d["student_id"]),
        fixed=vals(d.get("fixed", {})),
        semesters=tuple(SemesterSlice(int(s["index"]), vals(s["values"])) for s in d.get("semesters", [])),
        years=tuple(YearSlice(int(y["index"]), vals(y["values"])) for y in d.get("years", [])),
        timeline=EnrollmentTimeline(
            first_enrollment=_date(t["first_enrollment"]),
            last_enrollment=_date(t["last_enrollment"]),
            degree_awarded_at_origin=bool(t.get("degree_awarded_at_origin", False)),
            reappearance_date=_date(t.get("reappearance_date")),
            destination_graduated=bool(t.get("destination_graduated", False)),
            origin_program_level=int(t.get("origin_program_level", 2)),
            destination_program_level=t.get("destination_program_level"),
        ),
        has_fafsa=bool(d.get("has_fafsa", True)),
        excluded=None if d.get("excluded") is None else Exclusion(d["excluded"]),
        declarations={k: tuple(v) for k, v in d.get("declarations", {}).items()},
    )


def dumps_record(r: StudentRecord) -> str:
    return json.dumps(record_to_dict(r), separators=(",", ":"), allow_nan=False)


def write_jsonl(records: Iterable[StudentRecord], fh: IO[str], header: str | None = None) -> None:
    if header:
        fh.write(f"# {header}\n")
    for r in records:
        fh.write(dumps_record(r))
        fh.write("\n")


def iter_jsonl(fh: IO[str]) -> Iterator[StudentRecord]:
    for n, line in enumerate(fh, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            yield record_from_dict(json.loads(line))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise RecordError(f"line {n}: malformed record ({exc})") from exc


def save_records(records: Iterable[StudentRecord], path: str | Path, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_jsonl(records, fh, header)


def load_records(path: str | Path) -> list[StudentRecord]:
    with open(path, encoding="utf-8") as fh:
        return list(iter_jsonl(fh))
