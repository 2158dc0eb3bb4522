"""Derived features.

Time-series aggregates are running values: slice ``t`` only summarises
slices ``1..t``, so a stage-truncated view never sees later data.
"""

from __future__ import annotations

from typing import Sequence

from ..catalog import FeatureCatalog, default_catalog
from ..records import SemesterSlice, StudentRecord, YearSlice

RUNNING_SUMS = {
    "Sum-SessionSecond": "SessionSecond",
    "Sum-Post": "No-Post",
    "Sum-NumViews": "NumViews",
    "Sum-AttemptNumber": "AttemptNumber",
}
RUNNING_MEANS = {"Avg-Points": "Avg-Points-perClass", "Avg-Weighted": "Avg-Weighted-perClass"}
AID_SOURCES = ("PELL", "HOPE", "Grants", "Loans", "SCHOLARSHIP")
CHANGE_COUNTS = {
    "MRTL-CHANGES": "MARITAL-STATUS",
    "PAR-INCOME-CHANGES": "PAR-INCOME",
    "INC-WRK-CHANGES": "SPS-INC-FR-WRK",
}
CHANGED_FLAGS = {
    "Father-EDU-Status-Changed": "FATHER-HIGHEST-GRADE",
    "Mother-EDU-Status-Changed": "MOTHER-HIGHEST-GRADE",
}
RUNNING_EXTREMES = {"PAR-INCOME-MAX": ("PAR-INCOME", max), "PAR-INCOME-MIN": ("PAR-INCOME", min)}


def cumulative_gpa(quality_points: Sequence, hours: Sequence) -> float:
    """Σ quality points / Σ attempted hours over semesters where both are
    known; 0 when no hours were attempted."""
    qp = ha = 0.0
    for q, h in zip(quality_points, hours):
        if q is not None and h is not None:
            qp += q
            ha += h
    return qp / ha if ha > 0 else 0.0


def age_at(dob_year: float, first_enrollment) -> float:
    enroll = first_enrollment.year + (first_enrollment.timetuple().tm_yday - 1) / 365.25
    return round(enroll - dob_year, 1)


def _changes(seq) -> int:
    seen = [v for v in seq if v is not None]
    return sum(a != b for a, b in zip(seen, seen[1:]))


def _engineer_semesters(slices: tuple[SemesterSlice, ...]) -> tuple[SemesterSlice, ...]:
    out = []
    ha_sum = he_sum = qp_sum = 0.0
    gpa_qp = gpa_ha = 0.0
    pass_he = pass_ha = 0.0
    gpas: list[float] = []
    sums = {k: None for k in RUNNING_SUMS}
    means = {k: [] for k in RUNNING_MEANS}
    for s in slices:
        v = dict(s.values)
        ha, he, qp, gpa = (v.get(k) for k in ("HOURS-ATTEMPTED", "HOURS-EARNED", "QUALITY-POINTS", "GPA"))
        ha_sum += ha or 0.0
        he_sum += he or 0.0
        qp_sum += qp or 0.0
        if qp is not None and ha is not None:
            gpa_qp += qp
            gpa_ha += ha
        if he is not None and ha is not None:
            pass_he += he
            pass_ha += ha
        if gpa is not None:
            gpas.append(gpa)
        v["I-HOURS-ATTEMPTED"] = ha_sum
        v["I-HOURS-EARNED"] = he_sum
        v["I-QUALITY-POINTS"] = round(qp_sum, 6)
        v["I-GPA"] = gpa_qp / gpa_ha if gpa_ha > 0 else 0.0
        v["GPA-MAX"] = max(gpas) if gpas else None
        v["GPA-MIN"] = min(gpas) if gpas else None
        v["PASS-RATE"] = pass_he / pass_ha if pass_ha > 0 else 0.0
        for k, src in RUNNING_SUMS.items():
            x = v.get(src)
            if x is not None:
                sums[k] = (sums[k] or 0.0) + x
            v[k] = sums[k]
        for k, src in RUNNING_MEANS.items():
            x = v.get(src)
            if x is not None:
                means[k].append(x)
            v[k] = sum(means[k]) / len(means[k]) if means[k] else None
        out.append(SemesterSlice(s.index, v))
    return tuple(out)


def _engineer_years(slices: tuple[YearSlice, ...]) -> tuple[YearSlice, ...]:
    out = []
    history: dict[str, list] = {}
    for y in slices:
        v = dict(y.values)
        for fid in {*CHANGE_COUNTS.values(), *CHANGED_FLAGS.values(), "PAR-INCOME"}:
            history.setdefault(fid, []).append(v.get(fid))
        aids = [v.get(k) for k in AID_SOURCES if v.get(k) is not None]
        v["Aids"] = float(sum(aids)) if aids else None
        for k, src in CHANGE_COUNTS.items():
            v[k] = float(_changes(history[src]))
        for k, src in CHANGED_FLAGS.items():
            v[k] = 1.0 if _changes(history[src]) else 0.0
        for k, (src, fn) in RUNNING_EXTREMES.items():
            seen = [x for x in history[src] if x is not None]
            v[k] = fn(seen) if seen else None
        out.append(YearSlice(y.index, v))
    return tuple(out)


def engineer_record(record: StudentRecord, catalog: FeatureCatalog | None = None) -> StudentRecord:
    fixed = dict(record.fixed)
    dob = fixed.get("DOB")
    if dob is not None:
        fixed["AGE"] = age_at(dob, record.timeline.first_enrollment)
    keep = None if catalog is None else set(catalog.ids)

    def trim(values: dict) -> dict:
        return values if keep is None else {k: x for k, x in values.items() if k in keep}

    sems = tuple(SemesterSlice(s.index, trim(s.values)) for s in _engineer_semesters(record.semesters))
    years = tuple(YearSlice(y.index, trim(y.values)) for y in _engineer_years(record.years))
    return record.replace(fixed=trim(fixed), semesters=sems, years=years)


def engineer_features(records: Sequence[StudentRecord], catalog: FeatureCatalog | None = None) -> list[StudentRecord]:
    """Add engineered features to every record.  Engineered ids absent from
    ``catalog`` are not kept."""
    catalog = catalog or default_catalog()
    return [engineer_record(r, catalog) for r in records]
