"""Outcome labels, scenario label-collapsing and stage-masked views."""

from __future__ import annotations

import datetime as dt
import enum
from dataclasses import dataclass

import numpy as np

from .records import EnrollmentTimeline

REAPPEARANCE_WINDOW_DAYS = 730
DEFAULT_HORIZON = dt.date(2019, 12, 31)


class LabelClass(enum.IntEnum):
    Graduate = 0
    Transfer = 1
    TransferGrad = 2
    Dropout = 3


class Unlabeled(str, enum.Enum):
    Continuation = "Continuation"
    Indeterminate = "Indeterminate"


class Direction(str, enum.Enum):
    Up = "Up"
    Same = "Same"
    Down = "Down"


class MissingDirection(ValueError):
    pass


def assign_label(timeline: EnrollmentTimeline, horizon: dt.date = DEFAULT_HORIZON) -> LabelClass | Unlabeled:
    if timeline.degree_awarded_at_origin:
        return LabelClass.Graduate
    reappeared = timeline.reappearance_date
    if reappeared is not None and (reappeared - timeline.last_enrollment).days <= REAPPEARANCE_WINDOW_DAYS:
        return LabelClass.TransferGrad if timeline.destination_graduated else LabelClass.Transfer
    if timeline.last_enrollment >= horizon and reappeared is None:
        return Unlabeled.Continuation
    if (horizon - timeline.last_enrollment).days >= REAPPEARANCE_WINDOW_DAYS:
        return LabelClass.Dropout
    return Unlabeled.Indeterminate


def transfer_direction(timeline: EnrollmentTimeline) -> Direction | None:
    dest = timeline.destination_program_level
    if timeline.reappearance_date is None or dest is None:
        return None
    if dest > timeline.origin_program_level:
        return Direction.Up
    if dest == timeline.origin_program_level:
        return Direction.Same
    return Direction.Down


class Scenario(enum.IntEnum):
    S0 = 0
    SI = 1
    SII = 2
    SIII = 3
    SIV = 4
    SV = 5

    @property
    def class_names(self) -> tuple[str, ...]:
        return _CLASS_NAMES[self]

    @property
    def class_count(self) -> int:
        return len(_CLASS_NAMES[self])

    @property
    def at_risk_index(self) -> int:
        """Class used to order advisor reports (dropout side)."""
        return self.class_names.index("Dropout") if "Dropout" in self.class_names else 1

    @classmethod
    def parse(cls, value) -> "Scenario":
        if isinstance(value, Scenario):
            return value
        text = str(value).strip().upper()
        for s in cls:
            if text in (str(int(s)), s.name, s.name[1:] or "0"):
                return s
        raise ValueError(f"unknown scenario {value!r}")


_CLASS_NAMES = {
    Scenario.S0: ("Graduate", "Transfer", "TransferGrad", "Dropout"),
    Scenario.SI: ("Graduate", "Dropout", "Transfer"),
    Scenario.SII: ("Graduate", "Dropout", "Transfer"),
    Scenario.SIII: ("Graduate", "AtRisk"),
    Scenario.SIV: ("Graduate", "Dropout"),
    Scenario.SV: ("Graduate", "AtRisk"),
}

G, T, TG, D = LabelClass.Graduate, LabelClass.Transfer, LabelClass.TransferGrad, LabelClass.Dropout

_COLLAPSE = {
    Scenario.S0: {G: 0, T: 1, TG: 2, D: 3},
    Scenario.SI: {G: 0, D: 1, T: 2, TG: 2},
    Scenario.SII: {G: 0, TG: 0, D: 1, T: 2},
    Scenario.SIII: {G: 0, D: 1, T: 1, TG: 1},
    Scenario.SIV: {G: 0, TG: 0, D: 1, T: 1},
}


def collapse(label: LabelClass, direction: Direction | None, scenario: Scenario) -> int:
    """Class index of ``label`` under ``scenario``.

    Scenario V keeps a graduating transfer on the graduate side only when the
    destination program is the same level or higher.
    """
    label = LabelClass(label)
    scenario = Scenario(scenario)
    if scenario is Scenario.SV:
        if label is TG:
            if direction is None:
                raise MissingDirection("scenario V needs a transfer direction for TransferGrad")
            return 0 if Direction(direction) in (Direction.Up, Direction.Same) else 1
        return 0 if label is G else 1
    return _COLLAPSE[scenario][label]


def collapse_array(labels, directions, scenario: Scenario) -> np.ndarray:
    return np.array([collapse(l, d, scenario) for l, d in zip(labels, directions)], dtype=np.int64)


def collapse_matrix(counts: np.ndarray, scenario: Scenario) -> np.ndarray:
    """Collapse an S0 (4x4) count grid.  Scenario V needs direction information,
    so it is handled by :func:`collapse_array` on the labels instead."""
    scenario = Scenario(scenario)
    if scenario is Scenario.SV:
        raise MissingDirection("scenario V cannot be collapsed from an S0 matrix alone")
    m = _COLLAPSE[scenario]
    k = scenario.class_count
    out = np.zeros((k, k), dtype=counts.dtype)
    for i in LabelClass:
        for j in LabelClass:
            out[m[i], m[j]] += counts[int(i), int(j)]
    return out


class Stage(enum.IntEnum):
    Stage1 = 1
    Stage2 = 2
    Stage3 = 3
    Stage4 = 4

    @property
    def semester_slices(self) -> int:
        return (0, 2, 4, 6)[self - 1]

    @property
    def year_slices(self) -> int:
        return (0, 0, 2, 3)[self - 1]

    @classmethod
    def parse(cls, value) -> "Stage":
        if isinstance(value, Stage):
            return value
        return cls(int(str(value).strip().lower().removeprefix("stage")))


@dataclass(frozen=True)
class StagedSample:
    fixed: np.ndarray
    semesters: np.ndarray
    semester_mask: np.ndarray
    years: np.ndarray
    year_mask: np.ndarray
    label: int | None = None
    student_id: str = ""


def _fit_rows(block: np.ndarray, mask: np.ndarray, n: int):
    out = np.zeros((n,) + block.shape[1:], dtype=float)
    m = np.zeros(n, dtype=float)
    k = min(n, block.shape[0])
    out[:k] = block[:k]
    m[:k] = mask[:k]
    out[m == 0] = 0.0
    return out, m


def stage_view(sample: StagedSample, stage: Stage) -> StagedSample:
    """Truncate or zero-pad the time blocks to what is known at ``stage``."""
    stage = Stage(stage)
    sem, sem_mask = _fit_rows(sample.semesters, sample.semester_mask, stage.semester_slices)
    yr, yr_mask = _fit_rows(sample.years, sample.year_mask, stage.year_slices)
    return StagedSample(sample.fixed.copy(), sem, sem_mask, yr, yr_mask, sample.label, sample.student_id)
