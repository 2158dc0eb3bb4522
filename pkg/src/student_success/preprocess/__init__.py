"""Cleaning, imputation, outliers, engineering, encoding and balancing."""

from .balance import BalanceMethod, EmptyClass, balance_classes, cap_groups
from .cleaning import resolve_inconsistencies
from .dataset import Block, Dataset, build_dataset, concat, split_by_fafsa
from .encode import Transform, encode_and_scale
from .engineer import engineer_features
from .impute import ImputePolicy, NoCompleteNeighbors, Strategy, apply_impute, knn_fill
from .outliers import count_impossible, treat_outliers
from .pipeline import PrepConfig, Prepared, ScenarioData, prepare, scenario_labels, scenario_splits
from .split import TooSmall, stratified_split
from .store import load_scenario, save_scenario

__all__ = [
    "BalanceMethod", "Block", "Dataset", "EmptyClass", "ImputePolicy", "NoCompleteNeighbors", "PrepConfig",
    "Prepared", "ScenarioData", "Strategy", "TooSmall", "Transform", "apply_impute", "balance_classes",
    "build_dataset", "cap_groups", "concat", "count_impossible", "encode_and_scale", "engineer_features",
    "knn_fill", "load_scenario", "prepare", "resolve_inconsistencies", "save_scenario", "scenario_labels", "scenario_splits", "split_by_fafsa",
    "stratified_split", "treat_outliers",
]
