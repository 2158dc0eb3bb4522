"""Run configuration: ``key = value`` sections [run] [gen] [prep] [train] [report]."""

from __future__ import annotations

import configparser
import datetime as dt
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .baselines import ALL_BASELINES, BaselineKind
from .nn import FixedBranch
from .preprocess.balance import BalanceMethod
from .preprocess.pipeline import COHORTS, PrepConfig
from .staging import Scenario, Stage
from .synth import DEFAULT_LATENT_EFFECTS, DEFAULT_PLANTED, ConfigError, GenConfig
from .model import TrainConfig
from .attribution import Method

KEYS = {
    "run": {"seed", "out_dir", "catalog"},
    "gen": {"n_students", "fafsa_rate", "outlier_rate", "conflict_rate", "excluded_rate", "indeterminate_rate",
            "boundary_rate", "n_semesters_max", "min_semesters", "horizon", "label_mix", "planted", "latent_scale"},
    "prep": {"fractions", "drop_threshold", "balance", "cohort", "exclude_features", "cap_feature", "cap_ratio", "impute"},
    "train": {"stages", "scenarios", "archs", "epochs_max", "batch_size", "lr", "patience", "dense_units", "head",
              "lstm_units", "weight_decay"},
    "report": {"top_k", "importance_top", "method", "repeats", "stage", "scenario", "baselines", "split"},
}

# where artifacts go does not change what they contain
UNHASHED = {("run", "out_dir")}


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: Path = Path("runs")
    catalog: Path | None = None
    gen: GenConfig = field(default_factory=GenConfig)
    prep: PrepConfig = field(default_factory=PrepConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    stages: tuple[Stage, ...] = (Stage.Stage1, Stage.Stage2, Stage.Stage3, Stage.Stage4)
    scenarios: tuple[Scenario, ...] = (Scenario.SIII,)
    archs: tuple[FixedBranch, ...] = (FixedBranch.DenseStack,)
    top_k: int = 2
    importance_top: int = 10
    method: Method = Method.Occlusion
    repeats: int = 3
    report_stage: Stage | None = None
    report_scenario: Scenario | None = None
    baselines: tuple[BaselineKind, ...] = ALL_BASELINES
    report_split: str = "test"
    balance_enabled: bool = True
    fractions: tuple[float, float, float] = (0.96, 0.02, 0.02)
    config_hash: str = ""

    @property
    def stage_for_report(self) -> Stage:
        return self.report_stage or self.stages[-1]

    @property
    def scenario_for_report(self) -> Scenario:
        return self.report_scenario or self.scenarios[0]


def _list(text: str) -> list[str]:
    return [t.strip() for t in text.replace(";", ",").split(",") if t.strip()]


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in _list(text))


def _pairs(text: str) -> dict[str, str]:
    out = {}
    for item in _list(text):
        k, sep, v = item.partition("=") if "=" in item else item.partition(":")
        if not sep:
            raise ConfigError(f"expected key=value in {item!r}")
        out[k.strip()] = v.strip()
    return out


def _planted(text: str) -> tuple:
    effects = []
    for item in _list(text):
        parts = [p.strip() for p in item.split(":")]
        if len(parts) not in (2, 3):
            raise ConfigError(f"planted effect {item!r} must be feature:weight[:label]")
        effects.append((parts[0], float(parts[1]), *parts[2:]))
    return tuple(effects)


def canonical(parser: configparser.ConfigParser) -> str:
    lines = []
    for section in sorted(parser.sections()):
        lines.append(f"[{section}]")
        for key in sorted(parser[section]):
            if (section, key) in UNHASHED:
                continue
            lines.append(f"{key} = {parser[section][key].strip()}")
    return "\n".join(lines) + "\n"


def parse_config(text: str, base_dir: Path | str = ".", overrides: dict | None = None) -> RunConfig:
    """Parse config text; ``overrides`` maps ``section.key`` to a value and
    wins over the file.  Unknown sections or keys raise ConfigError."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",), inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}") from None
    for section in parser.sections():
        if section not in KEYS:
            raise ConfigError(f"config: unknown section [{section}]")
        unknown = set(parser[section]) - KEYS[section]
        if unknown:
            raise ConfigError(f"config: unknown keys in [{section}]: {', '.join(sorted(unknown))}")
    for dotted, value in (overrides or {}).items():
        section, key = dotted.split(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser[section][key] = str(value)
    try:
        return _build(parser, Path(base_dir))
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"config: {exc}") from None


def _build(p: configparser.ConfigParser, base: Path) -> RunConfig:
    def get(section, key, default=None):
        return p[section][key].strip() if p.has_section(section) and key in p[section] else default

    cfg = RunConfig()
    cfg.seed = int(get("run", "seed", 0))
    cfg.out_dir = (base / get("run", "out_dir", "runs")).resolve()
    cat = get("run", "catalog")
    cfg.catalog = None if cat is None else (base / cat).resolve()

    g = {}
    for key in ("n_students", "n_semesters_max", "min_semesters"):
        if get("gen", key) is not None:
            g[key] = int(get("gen", key))
    for key in ("fafsa_rate", "outlier_rate", "conflict_rate", "excluded_rate", "indeterminate_rate", "boundary_rate"):
        if get("gen", key) is not None:
            g[key] = float(get("gen", key))
    if get("gen", "horizon"):
        g["horizon"] = dt.date.fromisoformat(get("gen", "horizon"))
    if get("gen", "label_mix"):
        g["label_mix"] = {k: float(v) for k, v in _pairs(get("gen", "label_mix")).items()}
    g["planted_effects"] = _planted(get("gen", "planted")) if get("gen", "planted") is not None else DEFAULT_PLANTED
    scale = float(get("gen", "latent_scale", 1.0))
    g["latent_effects"] = {c: tuple(scale * w for w in v) for c, v in DEFAULT_LATENT_EFFECTS.items()}
    cfg.gen = GenConfig(seed=cfg.seed, **g)

    balance = get("prep", "balance", "MiceOversample")
    cohort = get("prep", "cohort", "all")
    if cohort not in COHORTS:
        raise ConfigError(f"prep.cohort must be one of {COHORTS}")
    cfg.prep = PrepConfig(
        seed=cfg.seed,
        horizon=cfg.gen.horizon,
        drop_threshold=float(get("prep", "drop_threshold", 0.8)),
        impute=_pairs(get("prep", "impute", "")),
        exclude_features=tuple(_list(get("prep", "exclude_features", ""))),
        cap_feature=get("prep", "cap_feature") or None,
        cap_ratio=float(get("prep", "cap_ratio", 1.0)),
        balance=BalanceMethod.MiceOversample if balance.lower() == "none" else BalanceMethod(balance),
        cohort=cohort,
    )
    cfg.balance_enabled = balance.lower() != "none"
    if get("prep", "fractions"):
        fr = tuple(float(v) for v in _list(get("prep", "fractions")))
        if len(fr) != 3 or min(fr) <= 0 or abs(sum(fr) - 1.0) > 1e-9:
            raise ConfigError("prep.fractions must be three positive numbers summing to 1")
        cfg.fractions = fr

    cfg.stages = tuple(Stage.parse(s) for s in _list(get("train", "stages", "1,2,3,4")))
    cfg.scenarios = tuple(Scenario.parse(s) for s in _list(get("train", "scenarios", "SIII")))
    cfg.archs = tuple(FixedBranch(a) for a in _list(get("train", "archs", "DenseStack")))
    if not cfg.stages or not cfg.scenarios or not cfg.archs:
        raise ConfigError("config: stages, scenarios and archs must be non-empty")
    t = {}
    for key, conv in (("epochs_max", int), ("batch_size", int), ("lr", float), ("lstm_units", int),
                      ("weight_decay", float)):
        if get("train", key) is not None:
            t[key] = conv(get("train", key))
    if get("train", "patience") is not None:
        t["early_stop_patience"] = int(get("train", "patience"))
    for key in ("dense_units", "head"):
        if get("train", key) is not None:
            t[key] = _ints(get("train", key))
    cfg.train = TrainConfig(seed=cfg.seed, branch=cfg.archs[0], **t)

    cfg.top_k = int(get("report", "top_k", 2))
    if cfg.top_k < 1:
        raise ConfigError("report.top_k must be >= 1")
    cfg.importance_top = int(get("report", "importance_top", 10))
    cfg.method = Method(get("report", "method", "Occlusion"))
    cfg.repeats = int(get("report", "repeats", 3))
    rs = get("report", "stage")
    cfg.report_stage = Stage.parse(rs) if rs else None
    rc = get("report", "scenario")
    cfg.report_scenario = Scenario.parse(rc) if rc else None
    if get("report", "baselines"):
        cfg.baselines = tuple(BaselineKind.parse(b) for b in _list(get("report", "baselines")))
    cfg.report_split = get("report", "split", "test")
    if cfg.report_split not in ("test", "dev", "all"):
        raise ConfigError("report.split must be test, dev or all")
    cfg.config_hash = hashlib.sha256(canonical(p).encode()).hexdigest()[:16]
    return cfg


def load_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    return parse_config(text, path.parent, overrides)
