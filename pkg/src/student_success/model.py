"""Stage architectures, training with early stopping and run manifests."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .nn import AdamState, FixedBranch, Inputs, MultiBranchNet, StageArchitecture, adam_step
from .preprocess.dataset import Dataset
from .preprocess.split import TooSmall, stratified_split
from .staging import Scenario, Stage

__all__ = [
    "DivergenceDetected", "History", "TooSmall", "TrainConfig", "TrainResult", "architecture_for", "build",
    "build_for", "split", "stage_inputs", "train", "write_manifest",
]


class DivergenceDetected(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs_max: int = 60
    batch_size: int = 64
    lr: float = 1e-3
    early_stop_patience: int = 10
    seed: int = 0
    branch: FixedBranch = FixedBranch.DenseStack
    dense_units: tuple[int, ...] = (128, 128)
    head: tuple[int, ...] = (64, 64)
    lstm_units: int = 64
    weight_decay: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "branch", FixedBranch(self.branch))
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.epochs_max < 1 or self.batch_size < 1 or self.early_stop_patience < 1:
            raise ValueError("epochs_max, batch_size and early_stop_patience must be positive")
        if self.lr < 0:
            raise ValueError("lr must be non-negative")


def architecture_for(stage: Stage, scenario: Scenario, branch: FixedBranch | str = FixedBranch.DenseStack,
                     **sizes) -> StageArchitecture:
    stage = Stage.parse(stage)
    return StageArchitecture(
        fixed_branch=FixedBranch(branch),
        use_semester_lstm=stage >= Stage.Stage2,
        use_year_lstm=stage >= Stage.Stage3,
        n_classes=Scenario.parse(scenario).class_count,
        **sizes,
    )


def build(stage: Stage, scenario: Scenario, arch_choice: FixedBranch | str, n_fixed: int,
          n_semester: int, n_year: int, seed: int = 0, **sizes) -> MultiBranchNet:
    return MultiBranchNet(architecture_for(stage, scenario, arch_choice, **sizes), n_fixed, n_semester, n_year, seed)


def build_for(dataset: Dataset, stage: Stage, scenario: Scenario, config: TrainConfig = TrainConfig()) -> MultiBranchNet:
    return build(stage, scenario, config.branch, dataset.fixed.width, dataset.semesters.width,
                 dataset.years.width, config.seed, dense_units=config.dense_units, head=config.head,
                 lstm_units=config.lstm_units)


def split(labels: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """96/2/2 stratified partition of row indices."""
    return stratified_split(labels, seed)


def stage_inputs(dataset: Dataset, stage: Stage) -> Inputs:
    """What is known at ``stage``: all fixed columns plus the first
    semester/year slices (zero-padded, mask 0, where a student has fewer)."""
    stage = Stage.parse(stage)

    def view(values, mask, k):
        if k == 0:
            return None, None
        n, t, f = values.shape
        v = np.zeros((n, k, f))
        m = np.zeros((n, k))
        take = min(k, t)
        v[:, :take] = values[:, :take]
        m[:, :take] = mask[:, :take]
        v[m == 0] = 0.0
        return v, m

    sem, sem_m = view(dataset.semesters.values, dataset.semester_mask, stage.semester_slices)
    yr, yr_m = view(dataset.years.values, dataset.year_mask, stage.year_slices)
    return Inputs(dataset.fixed.values.astype(float), sem, sem_m, yr, yr_m)


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    dev_loss: list[float] = field(default_factory=list)
    dev_acc: list[float] = field(default_factory=list)
    best_epoch: int = -1

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    model: MultiBranchNet
    history: History


def _evaluate(net: MultiBranchNet, x: Inputs, y: np.ndarray, batch: int = 1024) -> tuple[float, float]:
    total, correct = 0.0, 0
    for s in range(0, len(x), batch):
        loss, p = net.loss(x.take(slice(s, s + batch)), y[s:s + batch])
        total += loss * len(p)
        correct += int((p.argmax(axis=1) == y[s:s + batch]).sum())
    return total / len(y), correct / len(y)


def train(model: MultiBranchNet, train_x: Inputs, train_y: np.ndarray, dev_x: Inputs, dev_y: np.ndarray,
          config: TrainConfig = TrainConfig()) -> TrainResult:
    """Mini-batch Adam; stops after ``early_stop_patience`` epochs without a
    dev-loss improvement and restores the best-dev parameters."""
    rng = np.random.default_rng([config.seed, 0x7A1])
    state = AdamState()
    hist = History()
    best_loss, best_state, stale = np.inf, model.get_state(), 0
    n = len(train_x)
    train_y = np.asarray(train_y, dtype=int)
    dev_y = np.asarray(dev_y, dtype=int)
    for epoch in range(config.epochs_max):
        order = rng.permutation(n)
        for s in range(0, n, config.batch_size):
            idx = order[s:s + config.batch_size]
            loss, _ = model.loss_and_grad(train_x.take(idx), train_y[idx])
            if not np.isfinite(loss):
                raise DivergenceDetected(f"non-finite training loss at epoch {epoch}")
            grads = model.gradients()
            if config.weight_decay:
                params = model.parameters()
                for k, g in grads.items():
                    if params[k].ndim > 1:  # weights only, not biases
                        g += config.weight_decay * params[k]
            adam_step(model.parameters(), grads, state, lr=config.lr)
        tl, ta = _evaluate(model, train_x, train_y)
        dl, da = _evaluate(model, dev_x, dev_y)
        if not (np.isfinite(tl) and np.isfinite(dl)):
            raise DivergenceDetected(f"non-finite loss at epoch {epoch}")
        hist.train_loss.append(tl)
        hist.train_acc.append(ta)
        hist.dev_loss.append(dl)
        hist.dev_acc.append(da)
        if dl < best_loss:
            best_loss, best_state, stale = dl, model.get_state(), 0
            hist.best_epoch = epoch
        else:
            stale += 1
            if stale >= config.early_stop_patience:
                break
    model.set_state(best_state)
    return TrainResult(model, hist)


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def write_manifest(path: str | Path, *, stage: Stage, scenario: Scenario, arch: str, seed: int,
                   config_hash: str, metrics: dict) -> dict:
    manifest = {"stage": int(stage), "scenario": Scenario(scenario).name, "arch": arch, "seed": seed,
                "config_hash": config_hash, "metrics": metrics}
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest
