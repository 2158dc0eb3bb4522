"""End-to-end preparation: records in, encoded per-scenario splits out."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from ..catalog import FeatureCatalog, default_catalog
from ..records import StudentRecord, exclude_ineligible
from ..staging import DEFAULT_HORIZON, Scenario, collapse_array
from .balance import BalanceMethod, balance_classes, cap_groups
from .cleaning import resolve_inconsistencies
from .dataset import Dataset, build_dataset, split_by_fafsa
from .encode import Transform
from .engineer import engineer_features
from .impute import ImputePolicy, Strategy, apply_impute
from .outliers import count_impossible, treat_outliers
from .split import stratified_split

COHORTS = ("all", "fafsa", "no_fafsa")


@dataclass(frozen=True)
class PrepConfig:
    seed: int = 0
    horizon: dt.date = DEFAULT_HORIZON
    drop_threshold: float = 0.80
    impute: dict[str, str] = field(default_factory=dict)
    exclude_features: tuple[str, ...] = ()
    cap_feature: str | None = None
    cap_ratio: float = 1.0
    balance: BalanceMethod = BalanceMethod.MiceOversample
    cohort: str = "all"

    def __post_init__(self):
        if self.cohort not in COHORTS:
            raise ValueError(f"cohort must be one of {COHORTS}, got {self.cohort!r}")
        object.__setattr__(self, "balance", BalanceMethod(self.balance))


@dataclass
class Prepared:
    """Cleaned, outlier-treated and imputed dataset (not yet encoded)."""

    dataset: Dataset
    n_input: int
    n_excluded: int
    unlabeled: dict[str, int]
    dropped_features: list[str]
    impossible: dict[str, int]


def prepare(records: list[StudentRecord], config: PrepConfig = PrepConfig(),
            catalog: FeatureCatalog | None = None) -> Prepared:
    catalog = catalog or default_catalog()
    kept, excluded = exclude_ineligible(records)
    kept = [resolve_inconsistencies(r, config.seed, catalog) for r in kept]
    kept = engineer_features(kept, catalog)
    ds = build_dataset(kept, catalog, config.horizon)
    data, unlabeled = ds.dataset, ds.unlabeled
    if config.exclude_features:
        data = data.drop_features(config.exclude_features)
    if config.cohort != "all":
        fafsa, rest = split_by_fafsa(data)
        data = fafsa if config.cohort == "fafsa" else rest
    if config.cap_feature:
        data = cap_groups(data, config.cap_feature, config.cap_ratio, config.seed)
    impossible = count_impossible(data)
    data = treat_outliers(data)
    policy = ImputePolicy.from_catalog(data.catalog, config.drop_threshold)
    for fid, text in config.impute.items():
        policy.strategies[fid] = Strategy.parse(text)
    before = set(data.features)
    data = apply_impute(data, policy)
    dropped = [f for f in before if f not in set(data.features)]
    dropped.sort(key=catalog.ids.index)
    return Prepared(data, len(records), len(excluded), unlabeled, dropped, impossible)


@dataclass
class ScenarioData:
    scenario: Scenario
    transform: Transform
    train: Dataset
    dev: Dataset
    test: Dataset
    y_train: np.ndarray
    y_dev: np.ndarray
    y_test: np.ndarray
    train_unbalanced: int


def scenario_labels(ds: Dataset, scenario: Scenario) -> np.ndarray:
    return collapse_array(ds.labels, ds.directions, Scenario(scenario))


def scenario_splits(prepared: Dataset, scenario: Scenario, seed: int = 0,
                    balance: BalanceMethod | str | None = BalanceMethod.MiceOversample,
                    fractions: tuple[float, float, float] = (0.96, 0.02, 0.02)) -> ScenarioData:
    """Split, balance the training part and fit the encoder on it."""
    scenario = Scenario(scenario)
    y = scenario_labels(prepared, scenario)
    tr, dv, te = stratified_split(y, seed, fractions)
    train = prepared.subset(tr)
    y_train = y[tr]
    if balance is not None:
        train, y_train = balance_classes(train, balance, seed, labels=y_train, n_classes=scenario.class_count)
    t = Transform.fit(train)
    return ScenarioData(scenario, t, t.apply(train), t.apply(prepared.subset(dv)), t.apply(prepared.subset(te)),
                        y_train, y[dv], y[te], len(tr))
