"""Deterministic synthetic cohorts with planted outcome structure.

Every student gets three latent traits (aptitude, financial stress,
engagement), drawn i.i.d. standard normal.  Each raw feature is a monotone
map of a unit-variance score ``z = loadings . latents + noise``; time-series
scores carry AR(1) noise so that later stages see more of the latents.
Outcome labels are drawn from ``softmax(intercept + latent terms + planted
weights * z)``, which is also what :meth:`GenerativeModel.bayes_accuracy`
integrates by Monte Carlo.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr, ndtri, softmax

from .catalog import FeatureCatalog, Family, Kind, Temporality, default_catalog
from .records import (
    EnrollmentTimeline,
    Exclusion,
    SemesterSlice,
    StudentRecord,
    YearSlice,
)
from .staging import (
    DEFAULT_HORIZON,
    REAPPEARANCE_WINDOW_DAYS,
    Direction,
    LabelClass,
    Scenario,
    Unlabeled,
    collapse,
)

FAFSA_RATE = 42911 / 60822
LATENTS = ("aptitude", "financial_stress", "engagement")
SEMESTER_DAYS = 182


class ConfigError(ValueError):
    pass


DEFAULT_LABEL_MIX = {"Graduate": 0.5, "Transfer": 0.2, "TransferGrad": 0.1, "Dropout": 0.2}

# per-label weights on (aptitude, financial_stress, engagement)
DEFAULT_LATENT_EFFECTS = {
    "Graduate": (3.2, -2.0, 3.6),
    "Transfer": (0.0, 1.6, -0.8),
    "TransferGrad": (1.6, 0.8, 0.4),
    "Dropout": (-2.8, 2.6, -3.2),
}

DEFAULT_PLANTED = (
    ("HS-GPA", 0.8, "Graduate"),
    ("CROW-DISTANCE", 0.9, "Transfer"),
    ("CROW-DISTANCE", 0.5, "TransferGrad"),
)

DEFAULT_MISSING = {
    "Personal": 0.02,
    "Family": 0.05,
    "PreCollege": 0.10,
    "Financial": 0.03,
    "Academic": 0.01,
    "OnlineCourse": 0.08,
    "ActivityIndex": 0.08,
}

DEFAULT_MISSING_OVERRIDES = {
    **{f"A0{i}": 0.9 for i in range(1, 6)},
    **{k: 0.92 for k in ("ACCM", "ACCNGM", "ACCNGR", "ACCR", "ACCW")},
    **{k: 0.93 for k in ("COME", "COMG", "COMM", "COMR")},
    **{k: 0.88 for k in ("LSE", "LSM1", "LSM2")},
    "S01": 0.35, "S02": 0.35, "S05": 0.9, "S07": 0.85,
    "SS01": 0.85, "SS02": 0.85, "SS07": 0.85,
    "T-GPA": 0.7, "T-HOURS-ATTEMPTED": 0.7, "T-HOURS-EARNED": 0.7, "T-QUALITY-POINTS": 0.7,
    "HS-MATH-GRADE": 0.3, "HS-ENGLISH-GRADE": 0.3,
}


@dataclass(frozen=True)
class GenConfig:
    n_students: int = 1000
    seed: int = 0
    fafsa_rate: float = FAFSA_RATE
    label_mix: dict = field(default_factory=lambda: dict(DEFAULT_LABEL_MIX))
    planted_effects: tuple = DEFAULT_PLANTED
    latent_effects: dict = field(default_factory=lambda: dict(DEFAULT_LATENT_EFFECTS))
    missing_rate: dict = field(default_factory=lambda: dict(DEFAULT_MISSING))
    missing_overrides: dict = field(default_factory=lambda: dict(DEFAULT_MISSING_OVERRIDES))
    outlier_rate: float = 0.0
    conflict_rate: float = 0.05
    n_semesters_max: int = 8
    min_semesters: int = 6
    excluded_rate: float = 0.01
    indeterminate_rate: float = 0.02
    boundary_rate: float = 0.05
    horizon: dt.date = DEFAULT_HORIZON

    def __post_init__(self):
        if self.n_students <= 0:
            raise ConfigError("n_students must be > 0")
        for name in ("fafsa_rate", "outlier_rate", "conflict_rate", "excluded_rate",
                     "indeterminate_rate", "boundary_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be a probability, got {v}")
        for fam, v in self.missing_rate.items():
            if fam not in Family.__members__:
                raise ConfigError(f"unknown family {fam!r} in missing_rate")
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"missing_rate[{fam}] must be a probability")
        for fid, v in self.missing_overrides.items():
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"missing_overrides[{fid}] must be a probability")
        if set(self.label_mix) != set(LabelClass.__members__):
            raise ConfigError(f"label_mix must name exactly {list(LabelClass.__members__)}")
        if any(v <= 0 for v in self.label_mix.values()):
            raise ConfigError("label_mix proportions must be positive")
        if abs(sum(self.label_mix.values()) - 1.0) > 1e-9:
            raise ConfigError("label_mix must sum to 1")
        if set(self.latent_effects) - set(LabelClass.__members__):
            raise ConfigError("latent_effects keys must be label names")
        for effect in self.planted_effects:
            fid = effect[0]
            if fid not in FIXED_RECIPES:
                raise ConfigError(f"planted feature {fid!r} is not a generated fixed feature")
            if len(effect) > 2 and effect[2] not in LabelClass.__members__:
                raise ConfigError(f"unknown label {effect[2]!r} in planted_effects")
        if not 1 <= self.min_semesters <= self.n_semesters_max:
            raise ConfigError("need 1 <= min_semesters <= n_semesters_max")

    def with_(self, **changes) -> "GenConfig":
        return replace(self, **changes)


# --- feature recipes --------------------------------------------------------

@dataclass(frozen=True)
class Recipe:
    loadings: tuple[float, float, float]
    make: Callable[[np.ndarray, np.random.Generator], np.ndarray]
    categories: tuple[str, ...] = ()
    rho: float = 0.5


def _cont(mean, sd, lo, hi, decimals=2):
    return lambda z, rng: np.round(np.clip(mean + sd * z, lo, hi), decimals)


def _disc(mean, sd, lo, hi, step=1):
    return lambda z, rng: np.clip(np.round((mean + sd * z) / step) * step, lo, hi)


def _lognorm(mu, sigma, lo, hi, decimals=1):
    return lambda z, rng: np.round(np.clip(np.exp(mu + sigma * z), lo, hi), decimals)


def _hinge(mean, sd, lo, hi, decimals=0):
    return lambda z, rng: np.round(np.clip(mean + sd * z, lo, hi), decimals)


def _binary(p):
    t = ndtri(1.0 - p)
    return lambda z, rng: (z > t).astype(float)


def _categorical(probs):
    cuts = np.cumsum(probs)[:-1]

    def make(z, rng):
        return np.searchsorted(cuts, ndtr(z), side="right").astype(float)

    return make


def _cat(cats, probs, loadings=(0.0, 0.0, 0.0), rho=0.9):
    return Recipe(loadings, _categorical(probs), tuple(cats), rho)


FIXED_RECIPES: dict[str, Recipe] = {
    "GENDER": _cat(("F", "M"), (0.56, 0.44), (0.0, 0.0, -0.1)),
    "RACE": _cat(("White", "Black", "Asian", "Multiracial", "Other"), (0.55, 0.25, 0.08, 0.05, 0.07), (0.0, 0.2, 0.0)),
    "ETHNICITY": _cat(("NonHispanic", "Hispanic"), (0.88, 0.12), (0.0, 0.1, 0.0)),
    "US-VET": Recipe((0.0, 0.0, 0.0), _binary(0.03)),
    "AT-RISK-HOMELESS": Recipe((0.0, 0.5, 0.0), _binary(0.02)),
    "CROW-DISTANCE": Recipe((0.0, 0.0, -0.1), _lognorm(3.5, 1.1, 0.5, 3000.0)),
    "HAS-LEGAL-DEPEND": Recipe((0.0, 0.3, 0.0), _binary(0.08)),
    "PAR-AGE": Recipe((0.0, 0.0, 0.0), _cont(48.0, 7.0, 32.0, 90.0, 0)),
    "PAR-MRTL-STATUS": _cat(("Married", "Divorced", "Single", "Widowed"), (0.6, 0.2, 0.15, 0.05), (0.0, 0.4, 0.0)),
    "PAR-FOOD-STAMPS": Recipe((0.0, 0.6, 0.0), _binary(0.15)),
    "PAR-RECD-SSI": Recipe((0.0, 0.4, 0.0), _binary(0.05)),
    "PAR-RECD-TANF": Recipe((0.0, 0.5, 0.0), _binary(0.04)),
    "PAR-RECD-WIC": Recipe((0.0, 0.4, 0.0), _binary(0.08)),
    "PAR-SCHOOL-LUNCH": Recipe((0.0, 0.6, 0.0), _binary(0.25)),
    "WARD-OF-COURT": Recipe((0.0, 0.3, 0.0), _binary(0.01)),
    "FOOD-STAMPS": Recipe((0.0, 0.5, 0.0), _binary(0.10)),
    "RECD-SSI": Recipe((0.0, 0.3, 0.0), _binary(0.03)),
    "RECD-TANF": Recipe((0.0, 0.4, 0.0), _binary(0.03)),
    "RECD-WIC": Recipe((0.0, 0.4, 0.0), _binary(0.05)),
    "House": Recipe((0.0, -0.5, 0.0), _binary(0.3)),
    "HS-GPA": Recipe((0.75, 0.0, 0.1), _cont(3.1, 0.5, 0.0, 4.0)),
    "HS-MATH-GRADE": Recipe((0.65, 0.0, 0.0), _cont(3.0, 0.6, 0.0, 4.0)),
    "HS-ENGLISH-GRADE": Recipe((0.6, 0.0, 0.1), _cont(3.1, 0.55, 0.0, 4.0)),
    **{f"A0{i}": Recipe((0.6, 0.0, 0.0), _disc(21.0, 5.0, 1.0, 36.0)) for i in range(1, 6)},
    "ACCM": Recipe((0.5, 0.0, 0.0), _disc(70.0, 20.0, 20.0, 120.0)),
    "ACCNGM": Recipe((0.5, 0.0, 0.0), _disc(250.0, 20.0, 200.0, 300.0)),
    "ACCNGR": Recipe((0.5, 0.0, 0.0), _disc(250.0, 20.0, 200.0, 300.0)),
    "ACCR": Recipe((0.5, 0.0, 0.0), _disc(70.0, 20.0, 20.0, 120.0)),
    "ACCW": Recipe((0.5, 0.0, 0.0), _disc(5.0, 1.5, 1.0, 8.0)),
    **{k: Recipe((0.5, 0.0, 0.0), _disc(50.0, 20.0, 1.0, 99.0)) for k in ("COME", "COMG", "COMM", "COMR")},
    **{k: Recipe((0.4, 0.0, 0.0), _disc(2.0, 1.0, 0.0, 4.0)) for k in ("LSE", "LSM1", "LSM2")},
    "S01": Recipe((0.7, 0.0, 0.0), _disc(500.0, 100.0, 200.0, 800.0, 10)),
    "S02": Recipe((0.7, 0.0, 0.0), _disc(510.0, 100.0, 200.0, 800.0, 10)),
    "S05": Recipe((0.6, 0.0, 0.0), _disc(40.0, 8.0, 20.0, 60.0)),
    "S07": Recipe((0.6, 0.0, 0.0), _disc(490.0, 100.0, 200.0, 800.0, 10)),
    "SS01": Recipe((0.5, 0.0, 0.0), _disc(520.0, 100.0, 200.0, 800.0, 10)),
    "SS02": Recipe((0.5, 0.0, 0.0), _disc(520.0, 100.0, 200.0, 800.0, 10)),
    "SS07": Recipe((0.5, 0.0, 0.0), _disc(510.0, 100.0, 200.0, 800.0, 10)),
    "T-GPA": Recipe((0.4, 0.0, 0.0), _cont(2.9, 0.6, 0.0, 4.0)),
    "T-HOURS-ATTEMPTED": Recipe((0.0, 0.0, 0.0), _disc(15.0, 10.0, 1.0, 120.0)),
}

# the age score drives DOB and AGE together
AGE_RECIPE = Recipe((0.0, 0.2, -0.1), lambda z, rng: np.clip(17.5 + np.exp(0.9 + 0.7 * z), 16.0, 70.0))

SEMESTER_RECIPES: dict[str, Recipe] = {
    "HOURS-ATTEMPTED": Recipe((0.2, -0.4, 0.5), _disc(13.0, 2.5, 3.0, 21.0)),
    "GPA": Recipe((0.75, -0.1, 0.45), _cont(2.9, 0.7, 0.0, 4.0)),
    "CLASS-SIZE": Recipe((0.0, 0.0, 0.0), _cont(40.0, 20.0, 5.0, 300.0, 1)),
    "WITHDRAWALS": Recipe((-0.4, 0.3, -0.5), _disc(0.3, 0.9, 0.0, 6.0)),
    "JOB": Recipe((0.0, 0.7, 0.0), _binary(0.35)),
    "Paid-By-Student": Recipe((0.0, -0.85, 0.0), lambda z, rng: ndtr(z)),
    "Parking": Recipe((0.0, -0.6, 0.3), _binary(0.5)),
    "Meal": Recipe((0.0, -0.7, 0.1), _binary(0.4)),
    "ONLINE-CREDITS": Recipe((0.0, 0.0, 0.2), _disc(3.0, 3.0, 0.0, 12.0)),
    "Avg-Points-perClass": Recipe((0.6, 0.0, 0.6), _cont(75.0, 12.0, 0.0, 100.0, 1)),
    "Avg-Weighted-perClass": Recipe((0.6, 0.0, 0.6), _cont(74.0, 12.0, 0.0, 100.0, 1)),
    "No-Submission": Recipe((0.0, 0.0, 0.8), _disc(20.0, 8.0, 0.0, 500.0)),
    "QUIZ-GRADE": Recipe((0.75, 0.0, 0.4), _cont(72.0, 14.0, 0.0, 100.0, 1)),
    "No-Session": Recipe((0.0, 0.0, 0.85), _disc(60.0, 25.0, 0.0, 2000.0)),
    "SessionSecond": Recipe((0.0, 0.0, 0.85), _lognorm(11.0, 0.5, 0.0, 2.0e6, 0)),
    "No-Post": Recipe((0.0, 0.0, 0.8), _disc(8.0, 6.0, 0.0, 1000.0)),
    "NumViews": Recipe((0.0, 0.0, 0.8), _disc(150.0, 60.0, 0.0, 10000.0)),
    "AttemptNumber": Recipe((0.1, 0.0, 0.7), _disc(10.0, 5.0, 0.0, 1000.0)),
    "No-ForumId": Recipe((0.0, 0.0, 0.7), _disc(5.0, 3.0, 0.0, 200.0)),
    "No-TopicId": Recipe((0.0, 0.0, 0.7), _disc(10.0, 6.0, 0.0, 500.0)),
    "Visit-AvglTime-Class": Recipe((0.0, 0.0, 0.6), _cont(600.0, 200.0, 0.0, 1.0e5, 0)),
    "Visit-TotalTime-user": Recipe((0.0, 0.0, 0.8), _lognorm(10.0, 0.6, 0.0, 2.0e6, 0)),
}

_EDU = ("MiddleSchool", "HighSchool", "College", "Unknown")

YEAR_RECIPES: dict[str, Recipe] = {
    "PELL": Recipe((0.0, 0.8, 0.0), _hinge(2500.0, 2500.0, 0.0, 6345.0), rho=0.7),
    "HOPE": Recipe((0.7, 0.0, 0.0), _hinge(1500.0, 2500.0, 0.0, 5000.0), rho=0.7),
    "Grants": Recipe((0.0, 0.6, 0.0), _hinge(1500.0, 2000.0, 0.0, 12000.0), rho=0.7),
    "Loans": Recipe((0.0, 0.6, 0.0), _hinge(3000.0, 4000.0, 0.0, 20000.0), rho=0.7),
    "SCHOLARSHIP": Recipe((0.6, 0.0, 0.0), _hinge(-500.0, 2000.0, 0.0, 15000.0), rho=0.7),
    "TOT-FAM-CTRB": Recipe((0.0, -0.8, 0.0), _lognorm(8.5, 1.0, 0.0, 150000.0, 0), rho=0.8),
    "TOT-SAR-EFC": Recipe((0.0, -0.85, 0.0), _lognorm(8.3, 1.1, 0.0, 150000.0, 0), rho=0.8),
    "SPS-INC-FR-WRK": Recipe((0.0, 0.3, 0.0), _hinge(4000.0, 5000.0, 0.0, 90000.0), rho=0.7),
    "PAR-INCOME": Recipe((0.0, -0.85, 0.0), _lognorm(10.8, 0.7, 0.0, 900000.0, 0), rho=0.85),
    "DEPEND-AGE-0-5": Recipe((0.0, 0.3, 0.0), _disc(-1.0, 0.9, 0.0, 4.0), rho=0.9),
    "DEPEND-AGE-6-12": Recipe((0.0, 0.3, 0.0), _disc(-1.0, 0.9, 0.0, 4.0), rho=0.9),
    "DEPEND-AGE-13-PLUS": Recipe((0.0, 0.2, 0.0), _disc(-1.2, 0.9, 0.0, 4.0), rho=0.9),
    "FAM-MEMB": Recipe((0.0, 0.2, 0.0), _disc(2.0, 1.2, 1.0, 12.0), rho=0.9),
    "NO-IN-COLL": Recipe((0.0, 0.0, 0.0), _disc(1.2, 0.5, 1.0, 5.0), rho=0.9),
    "PAR-FAM-MEMB": Recipe((0.0, 0.2, 0.0), _disc(4.0, 1.2, 1.0, 12.0), rho=0.9),
    "PAR-NO-IN-COLL": Recipe((0.0, 0.0, 0.0), _disc(1.2, 0.5, 0.0, 5.0), rho=0.9),
    "MARITAL-STATUS": _cat(("Single", "Married", "Divorced"), (0.85, 0.12, 0.03), (0.0, 0.2, 0.0), rho=0.97),
    "FATHER-HIGHEST-GRADE": _cat(_EDU, (0.2, 0.45, 0.3, 0.05), (0.3, -0.4, 0.0), rho=0.98),
    "MOTHER-HIGHEST-GRADE": _cat(_EDU, (0.15, 0.45, 0.35, 0.05), (0.3, -0.4, 0.0), rho=0.98),
}

CATEGORIES = {k: r.categories for k, r in {**FIXED_RECIPES, **YEAR_RECIPES}.items() if r.categories}
DECLARED = ("GENDER", "RACE", "ETHNICITY")


def _feature_seed(seed: int, name: str) -> np.random.Generator:
    tag = sum((i + 1) * ord(c) for i, c in enumerate(name))
    return np.random.default_rng([seed, 0x5EED, tag, len(name)])


def _unit_score(latents: np.ndarray, loadings, noise: np.ndarray) -> np.ndarray:
    w = np.asarray(loadings, dtype=float)
    resid = math.sqrt(max(0.0, 1.0 - float(w @ w)))
    return latents @ w + resid * noise


def _ar1(rng: np.random.Generator, n: int, t: int, rho: float) -> np.ndarray:
    e = rng.standard_normal((n, t))
    out = np.empty((n, t))
    out[:, 0] = e[:, 0]
    s = math.sqrt(1.0 - rho * rho)
    for k in range(1, t):
        out[:, k] = rho * out[:, k - 1] + s * e[:, k]
    return out


# --- outcome model ----------------------------------------------------------

class GenerativeModel:
    """Outcome logits of a config: intercepts calibrated to ``label_mix``."""

    CALIBRATION_DRAWS = 40000

    def __init__(self, config: GenConfig):
        self.config = config
        self.latent_w = np.zeros((4, 3))
        for name, w in config.latent_effects.items():
            self.latent_w[LabelClass[name]] = w
        self.planted = []  # (feature, label index, weight)
        for effect in config.planted_effects:
            fid, weight = effect[0], float(effect[1])
            label = LabelClass[effect[2]] if len(effect) > 2 else LabelClass.Graduate
            self.planted.append((fid, int(label), weight))
        self.planted_features = sorted({p[0] for p in self.planted})
        self.intercepts = np.zeros(4)
        self._calibrate()

    def logits(self, latents: np.ndarray, planted_z: dict[str, np.ndarray]) -> np.ndarray:
        out = np.tile(self.intercepts, (latents.shape[0], 1)) + latents @ self.latent_w.T
        for fid, k, w in self.planted:
            out[:, k] += w * planted_z[fid]
        return out

    def probabilities(self, latents, planted_z) -> np.ndarray:
        return softmax(self.logits(latents, planted_z), axis=1)

    def sample_profiles(self, n: int, rng: np.random.Generator):
        latents = rng.standard_normal((n, 3))
        z = {fid: _unit_score(latents, FIXED_RECIPES[fid].loadings, rng.standard_normal(n))
             for fid in self.planted_features}
        return latents, z

    def _calibrate(self):
        rng = np.random.default_rng(20240601)
        latents, z = self.sample_profiles(self.CALIBRATION_DRAWS, rng)
        target = np.array([self.config.label_mix[c.name] for c in LabelClass])
        b = np.log(target)
        for _ in range(200):
            self.intercepts = b
            p = self.probabilities(latents, z).mean(axis=0)
            step = np.log(target) - np.log(p)
            b = b + step
            if np.max(np.abs(step)) < 1e-10:
                break
        self.intercepts = b - b.mean()

    @staticmethod
    def direction_up_probability(aptitude: np.ndarray) -> np.ndarray:
        """P(destination level >= origin | graduating transfer)."""
        return 1.0 / (1.0 + np.exp(-(0.8 + 1.5 * aptitude)))

    def bayes_accuracy(self, scenario: Scenario, draws: int = 400000, seed: int = 7) -> float:
        """Monte-Carlo accuracy of the Bayes rule that knows the true class probabilities."""
        rng = np.random.default_rng(seed)
        latents, z = self.sample_profiles(draws, rng)
        p = self.probabilities(latents, z)
        scenario = Scenario(scenario)
        k = scenario.class_count
        q = np.zeros((draws, k))
        if scenario is Scenario.SV:
            up = self.direction_up_probability(latents[:, 0])
            for label in LabelClass:
                if label is LabelClass.TransferGrad:
                    q[:, 0] += p[:, label] * up
                    q[:, 1] += p[:, label] * (1 - up)
                else:
                    q[:, collapse(label, None, scenario)] += p[:, label]
        else:
            for label in LabelClass:
                q[:, collapse(label, None, scenario)] += p[:, label]
        return float(q.max(axis=1).mean())


# --- cohort simulation ------------------------------------------------------

@dataclass
class SyntheticCohort:
    records: list[StudentRecord]
    intended: list  # LabelClass or Unlabeled per record
    latents: np.ndarray
    probabilities: np.ndarray
    planted_z: dict[str, np.ndarray]
    model: GenerativeModel


def _missing_mask(rng, shape, rate):
    if rate <= 0:
        return np.zeros(shape, dtype=bool)
    return rng.random(shape) < rate


def simulate_cohort(config: GenConfig, catalog: FeatureCatalog | None = None) -> SyntheticCohort:
    catalog = catalog or default_catalog()
    n = config.n_students
    S = config.n_semesters_max
    Y = (S + 1) // 2
    model = GenerativeModel(config)
    root = np.random.default_rng([config.seed, 1])
    latents = root.standard_normal((n, 3))
    apt = latents[:, 0]

    def miss_rate(fid):
        if fid in config.missing_overrides:
            return config.missing_overrides[fid]
        spec = catalog.get(fid)
        return config.missing_rate.get(spec.family.value, 0.0) if spec else 0.0

    # has_fafsa keeps its configured marginal rate but leans toward stressed students
    fr = _feature_seed(config.seed, "__fafsa__")
    fafsa_score = _unit_score(latents, (0.0, 0.5, 0.0), fr.standard_normal(n))
    has_fafsa = fafsa_score > ndtri(1.0 - config.fafsa_rate) if 0 < config.fafsa_rate < 1 else \
        np.full(n, config.fafsa_rate >= 1.0)

    def is_fafsa(fid):
        spec = catalog.get(fid)
        return bool(spec and spec.fafsa)

    fixed_vals: dict[str, np.ndarray] = {}
    fixed_z: dict[str, np.ndarray] = {}
    for fid, rec in FIXED_RECIPES.items():
        rng = _feature_seed(config.seed, fid)
        z = _unit_score(latents, rec.loadings, rng.standard_normal(n))
        fixed_z[fid] = z
        v = rec.make(z, rng).astype(object)
        if rec.categories:
            v = np.array([rec.categories[int(i)] for i in v], dtype=object)
        m = _missing_mask(rng, n, miss_rate(fid))
        if is_fafsa(fid):
            m |= ~has_fafsa
        v[m] = None
        fixed_vals[fid] = v

    # dependent fixed features
    rng = _feature_seed(config.seed, "T-derived")
    tha = fixed_vals["T-HOURS-ATTEMPTED"]
    tgpa = fixed_vals["T-GPA"]
    the = np.empty(n, dtype=object)
    tqp = np.empty(n, dtype=object)
    frac = np.clip(0.75 + 0.25 * rng.random(n), 0, 1)
    for i in range(n):
        if tha[i] is None or tgpa[i] is None:
            tha[i] = tgpa[i] = the[i] = tqp[i] = None
        else:
            the[i] = float(np.floor(tha[i] * frac[i]))
            tqp[i] = round(float(tgpa[i]) * float(tha[i]), 1)
    fixed_vals["T-HOURS-EARNED"] = the
    fixed_vals["T-QUALITY-POINTS"] = tqp

    rng = _feature_seed(config.seed, "distance")
    crow = fixed_vals["CROW-DISTANCE"]
    ratio = 1.15 + 0.25 * rng.random(n)
    speed = 1.0 + 0.5 * rng.random(n)
    drive = np.array([None if c is None else round(min(6000.0, c * r), 1) for c, r in zip(crow, ratio)], dtype=object)
    dur = np.array([None if d is None else round(min(6000.0, d * s + 5.0), 1) for d, s in zip(drive, speed)], dtype=object)
    fixed_vals["DRIVE-DISTANCE"] = drive
    fixed_vals["DRIVE-DURATION"] = dur

    # timelines
    rng = np.random.default_rng([config.seed, 2])
    probs = model.probabilities(latents, {f: fixed_z[f] for f in model.planted_features})
    gumbel = rng.gumbel(size=(n, 4))
    labels = np.argmax(model.logits(latents, {f: fixed_z[f] for f in model.planted_features}) + gumbel, axis=1)
    n_sem = np.where(labels == LabelClass.Graduate, S, rng.integers(config.min_semesters, S + 1, size=n))
    indeterminate = rng.random(n) < config.indeterminate_rate
    indeterminate &= labels != LabelClass.Graduate
    boundary = rng.random(n) < config.boundary_rate
    excluded_draw = rng.random(n)
    excluded_kind = rng.random(n)
    reappear_gap = rng.integers(31, REAPPEARANCE_WINDOW_DAYS + 1, size=n)
    origin_level = np.where(rng.random(n) < 0.8, 2, 1)
    up = rng.random(n) < GenerativeModel.direction_up_probability(apt)
    same = rng.random(n) < 0.5
    start_offsets = rng.integers(0, 15, size=n)
    recent_gap = rng.integers(1, REAPPEARANCE_WINDOW_DAYS, size=n)
    horizon = config.horizon
    latest_first = horizon - dt.timedelta(days=REAPPEARANCE_WINDOW_DAYS + S * SEMESTER_DAYS)
    first_year_max = latest_first.year - (1 if latest_first < dt.date(latest_first.year, 8, 31) else 0)
    first_years = rng.integers(min(2006, first_year_max), first_year_max + 1, size=n)

    timelines, intended = [], []
    for i in range(n):
        duration = int(n_sem[i]) * SEMESTER_DAYS - 60
        label = LabelClass(int(labels[i]))
        if indeterminate[i]:
            last = horizon - dt.timedelta(days=int(recent_gap[i]))
            first = last - dt.timedelta(days=duration)
            timelines.append(EnrollmentTimeline(first, last, origin_program_level=int(origin_level[i])))
            intended.append(Unlabeled.Indeterminate)
            continue
        first = dt.date(int(first_years[i]), 8, 15) + dt.timedelta(days=int(start_offsets[i]))
        last = first + dt.timedelta(days=duration)
        if label is LabelClass.Dropout and boundary[i]:
            last = horizon - dt.timedelta(days=REAPPEARANCE_WINDOW_DAYS)
            first = last - dt.timedelta(days=duration)
        kw = dict(origin_program_level=int(origin_level[i]))
        if label is LabelClass.Graduate:
            kw["degree_awarded_at_origin"] = True
        elif label in (LabelClass.Transfer, LabelClass.TransferGrad):
            gap = REAPPEARANCE_WINDOW_DAYS if boundary[i] else int(reappear_gap[i])
            kw["reappearance_date"] = last + dt.timedelta(days=gap)
            o = int(origin_level[i])
            if up[i]:
                dest = o if same[i] else min(4, o + 1)
            else:
                dest = o - 1
            kw["destination_program_level"] = dest
            kw["destination_graduated"] = label is LabelClass.TransferGrad
        timelines.append(EnrollmentTimeline(first, last, **kw))
        intended.append(label)

    # time series
    sem_vals: dict[str, np.ndarray] = {}
    for fid, rec in SEMESTER_RECIPES.items():
        rng = _feature_seed(config.seed, fid)
        w = np.asarray(rec.loadings)
        resid = math.sqrt(max(0.0, 1.0 - float(w @ w)))
        z = (latents @ w)[:, None] + resid * _ar1(rng, n, S, rec.rho)
        v = rec.make(z, rng).astype(object)
        v[_missing_mask(rng, (n, S), miss_rate(fid))] = None
        sem_vals[fid] = v

    rng = _feature_seed(config.seed, "semester-derived")
    ha = sem_vals["HOURS-ATTEMPTED"]
    gpa = sem_vals["GPA"]
    pass_frac = np.clip(ndtr(1.8 + 1.5 * (np.where(gpa == None, 2.9, gpa).astype(float) - 2.9) / 0.7), 0, 1)  # noqa: E711
    he = np.empty((n, S), dtype=object)
    qp = np.empty((n, S), dtype=object)
    ft = np.empty((n, S), dtype=object)
    tuition = np.empty((n, S), dtype=object)
    paid = sem_vals["Paid-By-Student"]
    fee_noise = rng.normal(0.0, 150.0, size=(n, S))
    for i in range(n):
        for s in range(S):
            h = ha[i, s]
            if h is None:
                he[i, s] = qp[i, s] = ft[i, s] = tuition[i, s] = None
                paid[i, s] = None
                continue
            he[i, s] = float(np.round(h * pass_frac[i, s]))
            qp[i, s] = None if gpa[i, s] is None else round(float(gpa[i, s]) * h, 1)
            ft[i, s] = 1.0 if h >= 12 else 0.0
            fee = round(float(np.clip(1200.0 + 250.0 * h + fee_noise[i, s], 0.0, 30000.0)), 0)
            tuition[i, s] = fee
            paid[i, s] = None if paid[i, s] is None else round(fee * float(paid[i, s]), 0)
    sem_vals.update({"HOURS-EARNED": he, "QUALITY-POINTS": qp, "FULL-TIME": ft, "Tuition-Fee": tuition})
    oc = sem_vals["ONLINE-CREDITS"]
    for i in range(n):
        for s in range(S):
            if oc[i, s] is not None and ha[i, s] is not None:
                oc[i, s] = min(oc[i, s], ha[i, s])

    year_vals: dict[str, np.ndarray] = {}
    for fid, rec in YEAR_RECIPES.items():
        rng = _feature_seed(config.seed, fid)
        w = np.asarray(rec.loadings)
        resid = math.sqrt(max(0.0, 1.0 - float(w @ w)))
        z = (latents @ w)[:, None] + resid * _ar1(rng, n, Y, rec.rho)
        v = rec.make(z, rng).astype(object)
        if rec.categories:
            v = np.vectorize(lambda k: rec.categories[int(k)], otypes=[object])(v)
        m = _missing_mask(rng, (n, Y), miss_rate(fid))
        if is_fafsa(fid):
            m |= ~has_fafsa[:, None]
        v[m] = None
        year_vals[fid] = v

    age_rng = _feature_seed(config.seed, "AGE")
    age_z = _unit_score(latents, AGE_RECIPE.loadings, age_rng.standard_normal(n))
    ages = AGE_RECIPE.make(age_z, age_rng)
    age_missing = _missing_mask(age_rng, n, miss_rate("DOB"))

    decl_rng = _feature_seed(config.seed, "declarations")
    n_forms = decl_rng.integers(1, 4, size=n)

    records = []
    width = len(str(n - 1))
    for i in range(n):
        t = timelines[i]
        fixed = {fid: _py(fixed_vals[fid][i]) for fid in catalog.ids if fid in fixed_vals}
        if not age_missing[i]:
            enroll = t.first_enrollment.year + (t.first_enrollment.timetuple().tm_yday - 1) / 365.25
            fixed["DOB"] = round(enroll - float(ages[i]), 3)
            fixed["AGE"] = round(float(ages[i]), 1)
        else:
            fixed["DOB"] = None
            fixed["AGE"] = None
        declarations = {}
        for fid in DECLARED:
            if fixed.get(fid) is not None:
                forms = (fixed[fid],) * int(n_forms[i])
                if decl_rng.random() < config.conflict_rate:
                    forms = _conflicting(fid, forms, decl_rng)
                declarations[fid] = forms
        sems = tuple(
            SemesterSlice(s + 1, {fid: _py(v[i, s]) for fid, v in sem_vals.items()})
            for s in range(int(n_sem[i]))
        )
        n_years = (int(n_sem[i]) + 1) // 2
        yrs = tuple(
            YearSlice(y + 1, {fid: _py(v[i, y]) for fid, v in year_vals.items()})
            for y in range(n_years)
        )
        excluded = None
        if excluded_draw[i] < config.excluded_rate:
            excluded = Exclusion.Military if excluded_kind[i] < 0.5 else Exclusion.Deceased
        records.append(StudentRecord(
            student_id=f"S{config.seed}-{i:0{width}d}",
            fixed=fixed,
            semesters=sems,
            years=yrs,
            timeline=t,
            has_fafsa=bool(has_fafsa[i]),
            excluded=excluded,
            declarations=declarations,
        ))
    planted_z = {f: fixed_z[f] for f in model.planted_features}
    return SyntheticCohort(records, intended, latents, probs, planted_z, model)


def _py(v):
    if v is None:
        return None
    if isinstance(v, str):
        return v
    return float(v)


def generate_cohort(config: GenConfig, catalog: FeatureCatalog | None = None) -> list[StudentRecord]:
    """``config.n_students`` clean records, deterministic in ``config``.

    Outliers are added separately by :func:`inject_anomalies`; use
    :func:`simulate_cohort` to also get latents and intended labels.
    """
    return simulate_cohort(config, catalog).records


# --- anomalies --------------------------------------------------------------

@dataclass(frozen=True)
class Anomaly:
    student_id: str
    where: str
    feature: str
    old: object
    new: object


def _anomalous_value(value: float, lo: float, hi: float, rng: np.random.Generator) -> float:
    span = hi - lo
    if rng.random() < 0.5:
        if rng.random() < 0.5:
            return round(hi + span * (0.5 + 1.5 * rng.random()), 1)
        return round(lo - span * (0.1 + 0.9 * rng.random()), 1)
    # extreme but possible
    return hi if abs(hi - value) >= abs(value - lo) else lo


def _conflicting(fid, forms, rng):
    others = [c for c in CATEGORIES[fid] if c != forms[0]]
    extra = others[int(rng.integers(len(others)))]
    return tuple(forms) + (extra,) * int(rng.integers(1, len(forms) + 1))


def inject_anomalies(records: Sequence[StudentRecord], config: GenConfig,
                     catalog: FeatureCatalog | None = None,
                     log: list | None = None) -> list[StudentRecord]:
    """Replace numeric cells by impossible or extreme values with probability
    ``outlier_rate`` each, and give each declared categorical feature a
    conflicting declaration with the same probability.  Seeded by
    ``config.seed``; ``outlier_rate=0`` returns the records unchanged."""
    catalog = catalog or default_catalog()
    eligible = {s.id: s.possible_range for s in catalog
                if s.kind in (Kind.Continuous, Kind.Discrete) and s.possible_range is not None}
    out = []
    for i, r in enumerate(records):
        rng = np.random.default_rng([config.seed, 3, i])
        changed = False

        def perturb(values, where):
            nonlocal changed
            new = dict(values)
            for fid, v in values.items():
                if fid not in eligible or v is None or isinstance(v, str):
                    continue
                if config.outlier_rate > 0 and rng.random() < config.outlier_rate:
                    lo, hi = eligible[fid]
                    nv = float(_anomalous_value(float(v), lo, hi, rng))
                    new[fid] = nv
                    changed = True
                    if log is not None:
                        log.append(Anomaly(r.student_id, where, fid, v, nv))
            return new

        fixed = perturb(r.fixed, "fixed")
        sems = tuple(SemesterSlice(s.index, perturb(s.values, f"semester {s.index}")) for s in r.semesters)
        yrs = tuple(YearSlice(y.index, perturb(y.values, f"year {y.index}")) for y in r.years)
        decl = dict(r.declarations)
        for fid, forms in r.declarations.items():
            if fid not in CATEGORIES or not forms:
                continue
            if config.outlier_rate > 0 and rng.random() < config.outlier_rate:
                decl[fid] = _conflicting(fid, forms, rng)
                changed = True
                if log is not None:
                    log.append(Anomaly(r.student_id, "declarations", fid, forms, decl[fid]))
        if changed:
            r = r.replace(fixed=fixed, semesters=sems, years=yrs, declarations=decl)
        out.append(r)
    return out
