"""Feature metadata: families, temporality, kinds and the catalog CSV format."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator


class CatalogError(ValueError):
    pass


class ParseError(CatalogError):
    pass


class DuplicateId(CatalogError):
    pass


class UnknownEnum(CatalogError):
    pass


class Family(str, enum.Enum):
    Personal = "Personal"
    Family = "Family"
    PreCollege = "PreCollege"
    Financial = "Financial"
    Academic = "Academic"
    OnlineCourse = "OnlineCourse"
    ActivityIndex = "ActivityIndex"


class Temporality(str, enum.Enum):
    Fixed = "Fixed"
    PerSemester = "PerSemester"
    PerYear = "PerYear"


class Kind(str, enum.Enum):
    Continuous = "Continuous"
    Discrete = "Discrete"
    Categorical = "Categorical"
    Binary = "Binary"


REQUIRED_COLUMNS = ("id", "family", "temporality", "kind", "engineered", "min", "max")
OPTIONAL_COLUMNS = ("sources", "fafsa", "impute")


@dataclass(frozen=True)
class FeatureSpec:
    """Metadata for one feature.

    ``sources`` lists the ids an engineered feature is derived from,
    ``fafsa`` marks features whose only source is the FAFSA form and
    ``impute`` names the default missing-value strategy.
    """

    id: str
    family: Family
    temporality: Temporality
    kind: Kind
    engineered: bool = False
    possible_range: tuple[float, float] | None = None
    sources: tuple[str, ...] = ()
    fafsa: bool = False
    impute: str = "Median"

    def __post_init__(self):
        if not self.id:
            raise ParseError("feature id must be non-empty")
        if self.possible_range is not None:
            lo, hi = self.possible_range
            if not lo < hi:
                raise ParseError(f"{self.id}: possible_range min must be < max, got {self.possible_range}")
        if self.engineered and not self.sources:
            raise ParseError(f"{self.id}: engineered feature must declare its source ids")

    @property
    def numeric(self) -> bool:
        return self.kind is not Kind.Categorical

    def in_range(self, value: float) -> bool:
        if self.possible_range is None:
            return True
        lo, hi = self.possible_range
        return lo <= value <= hi


@dataclass(frozen=True)
class FeatureCatalog:
    specs: tuple[FeatureSpec, ...] = ()
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        for spec in self.specs:
            if spec.id in index:
                raise DuplicateId(f"duplicate feature id {spec.id!r}")
            index[spec.id] = spec
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.specs)

    def __iter__(self) -> Iterator[FeatureSpec]:
        return iter(self.specs)

    def __contains__(self, feature_id: str) -> bool:
        return feature_id in self._index

    def __getitem__(self, feature_id: str) -> FeatureSpec:
        return self._index[feature_id]

    def get(self, feature_id: str) -> FeatureSpec | None:
        return self._index.get(feature_id)

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.specs]

    def by_temporality(self, temporality: Temporality) -> list[FeatureSpec]:
        return [s for s in self.specs if s.temporality is temporality]

    def fafsa_ids(self) -> set[str]:
        return {s.id for s in self.specs if s.fafsa}

    def without(self, ids: Iterable[str]) -> "FeatureCatalog":
        drop = set(ids)
        return FeatureCatalog(tuple(s for s in self.specs if s.id not in drop))


def _parse_enum(enum_cls, text: str, line: int):
    try:
        return enum_cls(text.strip())
    except ValueError:
        raise UnknownEnum(f"line {line}: unknown {enum_cls.__name__} {text!r}") from None


def _parse_bool(text: str, line: int) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no", ""):
        return False
    raise ParseError(f"line {line}: expected boolean, got {text!r}")


def _parse_bound(text: str, line: int) -> float | None:
    t = text.strip()
    if not t:
        return None
    try:
        value = float(t)
    except ValueError:
        raise ParseError(f"line {line}: bad numeric bound {text!r}") from None
    if not math.isfinite(value):
        raise ParseError(f"line {line}: bound must be finite")
    return value


def parse_catalog(text: str) -> FeatureCatalog:
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("catalog file is empty (no header)") from None
    if tuple(header[: len(REQUIRED_COLUMNS)]) != REQUIRED_COLUMNS:
        raise ParseError(f"bad header {header!r}, expected {','.join(REQUIRED_COLUMNS)}")
    extra = header[len(REQUIRED_COLUMNS):]
    if any(col not in OPTIONAL_COLUMNS for col in extra):
        raise ParseError(f"unknown catalog columns {extra!r}")

    specs = []
    seen = set()
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        cells = dict(zip(header, row))
        fid = cells["id"].strip()
        if not fid:
            raise ParseError(f"line {line}: empty id")
        if fid in seen:
            raise DuplicateId(f"line {line}: duplicate feature id {fid!r}")
        seen.add(fid)
        lo = _parse_bound(cells["min"], line)
        hi = _parse_bound(cells["max"], line)
        if (lo is None) != (hi is None):
            # half-open ranges are stored as unbounded on the missing side
            lo = -math.inf if lo is None else lo
            hi = math.inf if hi is None else hi
        rng = None if lo is None else (lo, hi)
        sources = tuple(s for s in cells.get("sources", "").split(";") if s.strip())
        specs.append(
            FeatureSpec(
                id=fid,
                family=_parse_enum(Family, cells["family"], line),
                temporality=_parse_enum(Temporality, cells["temporality"], line),
                kind=_parse_enum(Kind, cells["kind"], line),
                engineered=_parse_bool(cells["engineered"], line),
                possible_range=rng,
                sources=sources,
                fafsa=_parse_bool(cells.get("fafsa", ""), line),
                impute=cells.get("impute", "").strip() or "Median",
            )
        )
    return FeatureCatalog(tuple(specs))


def load_catalog(path: str | Path) -> FeatureCatalog:
    """Read a catalog CSV (header ``id,family,temporality,kind,engineered,min,max``).

    The optional trailing columns ``sources,fafsa,impute`` are understood too.
    """
    return parse_catalog(Path(path).read_text(encoding="utf-8"))


def _fmt_bound(x: float | None) -> str:
    if x is None or math.isinf(x):
        return ""
    return repr(int(x)) if float(x).is_integer() else repr(x)


def serialize_catalog(catalog: FeatureCatalog) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REQUIRED_COLUMNS + OPTIONAL_COLUMNS)
    for s in catalog:
        lo, hi = s.possible_range if s.possible_range else (None, None)
        writer.writerow([
            s.id, s.family.value, s.temporality.value, s.kind.value,
            "true" if s.engineered else "false",
            _fmt_bound(lo), _fmt_bound(hi),
            ";".join(s.sources), "true" if s.fafsa else "false", s.impute,
        ])
    return buf.getvalue()


def save_catalog(catalog: FeatureCatalog, path: str | Path) -> None:
    Path(path).write_text(serialize_catalog(catalog), encoding="utf-8")


def default_catalog_path() -> Path:
    return Path(str(resources.files("student_success") / "data" / "default_catalog.csv"))


def default_catalog() -> FeatureCatalog:
    return load_catalog(default_catalog_path())
