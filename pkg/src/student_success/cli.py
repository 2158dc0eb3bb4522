"""``student-success`` command line: gen, prep, train, eval, baselines, explain, report, all.

Exit codes: 0 success, 1 usage or config error, 2 data or validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import baselines as bl
from .attribution import IMPORTANCE_COLUMNS, Reference, importance_rows, per_label_contribution, permutation_importance
from .catalog import CatalogError, default_catalog, load_catalog
from .config import RunConfig, load_config
from .metrics import RECALL_COLUMNS, csv_text, evaluate, header_line, metrics_json, recall_rows, run_entry
from .model import DivergenceDetected, build_for, stage_inputs, train, write_manifest
from .nn import load_checkpoint, save_checkpoint
from .preprocess import prepare, scenario_splits
from .preprocess.dataset import concat
from .preprocess.store import load_scenario, save_scenario
from .records import RecordError, load_records, save_records
from .report import MissingModel, emit_student_reports
from .synth import ConfigError, generate_cohort, inject_anomalies

COMMANDS = ("gen", "prep", "train", "eval", "baselines", "explain", "report", "all")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="student-success", description="Synthetic student-success pipeline.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="run configuration file")
    p.add_argument("--stage", help="override stages (e.g. 2 or 1,2)")
    p.add_argument("--scenario", help="override scenarios (e.g. 3, SIII or 1,3)")
    p.add_argument("--seed", type=int)
    p.add_argument("--top-k", type=int, dest="top_k")
    p.add_argument("--out-dir", dest="out_dir", help="override [run] out_dir")
    return p


def overrides_from(args) -> dict:
    o = {}
    if args.stage is not None:
        o["train.stages"] = args.stage
        o["report.stage"] = args.stage.split(",")[-1]
    if args.scenario is not None:
        o["train.scenarios"] = args.scenario
        o["report.scenario"] = args.scenario.split(",")[0]
    if args.seed is not None:
        o["run.seed"] = args.seed
    if args.top_k is not None:
        o["report.top_k"] = args.top_k
    if args.out_dir is not None:
        o["run.out_dir"] = str(Path(args.out_dir).resolve())
    return o


# --- artifact paths ----------------------------------------------------------

def _cohort_path(cfg: RunConfig) -> Path:
    return cfg.out_dir / "cohort.jsonl"


def _prep_path(cfg: RunConfig, scenario) -> Path:
    return cfg.out_dir / "prep" / f"{scenario.name}.npz"


def _model_path(cfg: RunConfig, stage, scenario, arch) -> Path:
    return cfg.out_dir / "models" / f"stage{int(stage)}_{scenario.name}_{arch.value}.json"


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise DataError(f"missing {path}; run `{producer}` first")
    return path


def _header(cfg: RunConfig) -> str:
    return header_line(cfg.config_hash, cfg.seed)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")


def _catalog(cfg: RunConfig):
    return load_catalog(cfg.catalog) if cfg.catalog else default_catalog()


def _eval_part(sd, split: str):
    if split == "dev":
        return sd.dev, sd.y_dev
    if split == "test":
        return sd.test, sd.y_test
    return concat([sd.dev, sd.test]), np.concatenate([sd.y_dev, sd.y_test])


def _load_model(cfg, stage, scenario, arch):
    path = _model_path(cfg, stage, scenario, arch)
    if not path.exists():
        raise MissingModel(f"no model for stage {int(stage)} scenario {scenario.name} ({arch.value}); run `train`")
    return load_checkpoint(path)[0]


# --- subcommands ---------------------------------------------------------------

def cmd_gen(cfg: RunConfig, log) -> None:
    catalog = _catalog(cfg)
    records = inject_anomalies(generate_cohort(cfg.gen, catalog), cfg.gen, catalog)
    path = _cohort_path(cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_records(records, path, header=_header(cfg)[2:].strip())
    log(f"gen: {len(records)} records -> {path}")


def cmd_prep(cfg: RunConfig, log) -> None:
    records = load_records(_require(_cohort_path(cfg), "gen"))
    prepared = prepare(records, cfg.prep, _catalog(cfg))
    params = {
        "config_hash": cfg.config_hash,
        "seed": cfg.seed,
        "n_input": prepared.n_input,
        "n_excluded": prepared.n_excluded,
        "unlabeled": prepared.unlabeled,
        "n_rows": prepared.dataset.n,
        "dropped_features": prepared.dropped_features,
        "impossible": prepared.impossible,
        "scenarios": {},
    }
    balance = cfg.prep.balance if cfg.balance_enabled else None
    for scenario in cfg.scenarios:
        sd = scenario_splits(prepared.dataset, scenario, cfg.seed, balance, cfg.fractions)
        path = _prep_path(cfg, scenario)
        path.parent.mkdir(parents=True, exist_ok=True)
        save_scenario(sd, path, {"config_hash": cfg.config_hash, "seed": cfg.seed})
        params["scenarios"][scenario.name] = {
            "train": sd.train.n, "train_unbalanced": sd.train_unbalanced, "dev": sd.dev.n, "test": sd.test.n,
            "transform": json.loads(sd.transform.to_json()),
        }
    _write(cfg.out_dir / "prep.params.json", json.dumps(params, indent=2, sort_keys=True) + "\n")
    log(f"prep: {prepared.dataset.n} rows from {prepared.n_input} records")


def cmd_train(cfg: RunConfig, log) -> None:
    (cfg.out_dir / "models").mkdir(parents=True, exist_ok=True)
    for scenario in cfg.scenarios:
        sd, _ = load_scenario(_require(_prep_path(cfg, scenario), "prep"))
        for stage in cfg.stages:
            for arch in cfg.archs:
                tc = cfg.train.__class__(**{**cfg.train.__dict__, "branch": arch})
                net = build_for(sd.train, stage, scenario, tc)
                res = train(net, stage_inputs(sd.train, stage), sd.y_train,
                            stage_inputs(sd.dev, stage), sd.y_dev, tc)
                path = _model_path(cfg, stage, scenario, arch)
                meta = {"stage": int(stage), "scenario": scenario.name, "arch": arch.value,
                        "config_hash": cfg.config_hash, "seed": cfg.seed}
                save_checkpoint(res.model, path, meta)
                h = res.history
                write_manifest(path.with_name(path.stem + ".manifest.json"), stage=stage, scenario=scenario,
                               arch=arch.value, seed=cfg.seed, config_hash=cfg.config_hash,
                               metrics={"best_epoch": h.best_epoch, "dev_accuracy": h.dev_acc[h.best_epoch],
                                        "dev_loss": h.dev_loss[h.best_epoch], "epochs": len(h.dev_loss)})
                log(f"train: stage {int(stage)} {scenario.name} {arch.value} dev acc {h.dev_acc[h.best_epoch]:.4f}")


def cmd_eval(cfg: RunConfig, log) -> None:
    entries, rows = [], []
    for scenario in cfg.scenarios:
        sd, _ = load_scenario(_require(_prep_path(cfg, scenario), "prep"))
        part, y = _eval_part(sd, cfg.report_split)
        for stage in cfg.stages:
            for arch in cfg.archs:
                net = _load_model(cfg, stage, scenario, arch)
                cm = evaluate(y, net.predict(stage_inputs(part, stage)), scenario.class_count, scenario.class_names)
                entries.append(run_entry(cm, int(stage), scenario.name, arch.value, cfg.report_split))
                rows += [[*r[:2], arch.value, *r[2:]] for r in recall_rows(cm, int(stage), scenario.name)]
                log(f"eval: stage {int(stage)} {scenario.name} {arch.value} accuracy {entries[-1]['metrics']['accuracy']:.4f}")
    _write(cfg.out_dir / "metrics.json", metrics_json(entries, cfg.config_hash, cfg.seed))
    cols = [*RECALL_COLUMNS[:2], "arch", *RECALL_COLUMNS[2:]]
    _write(cfg.out_dir / "recalls.csv", csv_text(_header(cfg), cols, rows))


def cmd_baselines(cfg: RunConfig, log) -> None:
    rows = []
    for scenario in cfg.scenarios:
        sd, _ = load_scenario(_require(_prep_path(cfg, scenario), "prep"))
        part, y = _eval_part(sd, cfg.report_split)
        for stage in cfg.stages:
            Xtr = bl.flatten(stage_inputs(sd.train, stage))
            Xev = bl.flatten(stage_inputs(part, stage))
            rows += bl.compare(Xtr, sd.y_train, Xev, y, scenario.class_count, int(stage), scenario.name, cfg.baselines)
    _write(cfg.out_dir / "baselines.csv", csv_text(_header(cfg), bl.COMPARISON_COLUMNS, rows))
    log(f"baselines: {len(rows)} rows")


def _report_target(cfg: RunConfig):
    stage, scenario = cfg.stage_for_report, cfg.scenario_for_report
    sd, _ = load_scenario(_require(_prep_path(cfg, scenario), "prep"))
    net = _load_model(cfg, stage, scenario, cfg.archs[0])
    return stage, scenario, sd, net


def cmd_explain(cfg: RunConfig, log) -> None:
    stage, scenario, sd, net = _report_target(cfg)
    part, y = _eval_part(sd, cfg.report_split)
    overall = permutation_importance(net, part, y, stage, cfg.repeats, cfg.seed)
    top, ratios = per_label_contribution(net, part, y, stage, cfg.importance_top, scenario.class_count,
                                         cfg.repeats, cfg.seed, importance=overall)
    rows = importance_rows(overall, top, ratios, scenario.class_names)
    _write(cfg.out_dir / "importance.csv", csv_text(_header(cfg), IMPORTANCE_COLUMNS, rows))
    log(f"explain: {len(overall)} features ranked for stage {int(stage)} {scenario.name}")


def cmd_report(cfg: RunConfig, log) -> None:
    stage, scenario, sd, net = _report_target(cfg)
    part, _ = _eval_part(sd, cfg.report_split)
    path = cfg.out_dir / "student_reports.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    emit_student_reports(net, part, stage, scenario, cfg.top_k, Reference.from_training(sd.train), cfg.method,
                         path, cfg.config_hash, cfg.seed)
    log(f"report: {part.n} students -> {path}")


HANDLERS = {
    "gen": [cmd_gen],
    "prep": [cmd_prep],
    "train": [cmd_train],
    "eval": [cmd_eval],
    "baselines": [cmd_baselines],
    "explain": [cmd_explain],
    "report": [cmd_report],
    "all": [cmd_gen, cmd_prep, cmd_train, cmd_eval, cmd_baselines, cmd_explain, cmd_report],
}

_MODULE_OF = {
    "cmd_gen": "gen", "cmd_prep": "preprocess", "cmd_train": "model", "cmd_eval": "eval-metrics",
    "cmd_baselines": "baselines", "cmd_explain": "attribution", "cmd_report": "report",
}


def main(argv: list[str] | None = None) -> int:
    def log(msg):
        print(msg, file=sys.stderr)

    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config, overrides_from(args))
    except UsageError as exc:
        log(str(exc))
        return 1
    except (ConfigError, CatalogError) as exc:
        msg = str(exc)
        log(msg if msg.startswith("config") else f"config: {msg}")
        return 1
    for handler in HANDLERS[args.command]:
        try:
            handler(cfg, log)
        except (DataError, MissingModel, RecordError, DivergenceDetected, bl.SingularCovariance,
                bl.EmptyClass, OSError, ValueError) as exc:
            log(f"{_MODULE_OF[handler.__name__]}: {exc}")
            return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
