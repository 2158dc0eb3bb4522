"""Per-student advisor reports: class probabilities plus top signed impacts."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attribution import Method, Reference, student_attribution
from .metrics import csv_text, header_line
from .model import stage_inputs
from .nn import MultiBranchNet
from .preprocess.dataset import Dataset
from .staging import Scenario, Stage


class MissingModel(LookupError):
    """No trained model for the requested (stage, scenario)."""


@dataclass
class StudentReportRow:
    student_id: str
    stage: int
    scenario: str
    probabilities: tuple[float, ...]
    impacts: tuple[tuple[str, float], ...]

    def cells(self, top_k: int) -> list:
        row = [self.student_id, self.stage, self.scenario, *self.probabilities]
        for k in range(top_k):
            if k < len(self.impacts):
                row += [self.impacts[k][0], self.impacts[k][1]]
            else:
                row += ["", ""]
        return row


def report_columns(scenario: Scenario, top_k: int) -> list[str]:
    cols = ["student_id", "stage", "scenario"] + [f"p_{c}" for c in Scenario(scenario).class_names]
    for k in range(1, top_k + 1):
        cols += [f"feature_{k}", f"impact_{k}"]
    return cols


def student_reports(model: MultiBranchNet | None, dataset: Dataset, stage: Stage, scenario: Scenario,
                    top_k: int = 2, reference: Reference | None = None,
                    method: Method | str = Method.Occlusion) -> list[StudentReportRow]:
    """Rows ordered by at-risk probability, highest first (ties by id)."""
    if model is None:
        raise MissingModel(f"no model for stage {int(stage)} scenario {Scenario(scenario).name}")
    stage, scenario = Stage(stage), Scenario(scenario)
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    proba = model.predict_proba(stage_inputs(dataset, stage))
    reference = reference or Reference.from_training(dataset)
    rows = []
    for i in range(dataset.n):
        entries = student_attribution(model, dataset, i, stage, method, top_k, reference)
        rows.append(StudentReportRow(str(dataset.ids[i]), int(stage), scenario.name,
                                     tuple(float(p) for p in proba[i]),
                                     tuple((e.feature, e.score) for e in entries)))
    risk = scenario.at_risk_index
    rows.sort(key=lambda r: (-r.probabilities[risk], r.student_id))
    return rows


def emit_student_reports(model: MultiBranchNet | None, dataset: Dataset, stage: Stage, scenario: Scenario,
                         top_k: int = 2, reference: Reference | None = None,
                         method: Method | str = Method.Occlusion, path: str | Path | None = None,
                         config_hash: str = "", seed: int = 0) -> str:
    """CSV text of :func:`student_reports`; also written to ``path`` if given."""
    rows = student_reports(model, dataset, stage, scenario, top_k, reference, method)
    text = csv_text(header_line(config_hash, seed), report_columns(scenario, top_k), [r.cells(top_k) for r in rows])
    if path is not None:
        Path(path).write_text(text, encoding="utf-8", newline="")
    return text
