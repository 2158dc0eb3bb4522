"""End-to-end acceptance checks.  Each test prints one PASS/FAIL line."""

import datetime as dt
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import knn_oracle
from gradutil import isolated_reports, stage_net
from student_success import baselines as bl
from student_success.attribution import (
    Reference, gradinput_impacts, occlusion_impacts, permutation_importance, visible_features,
)
from student_success.cli import main
from student_success.metrics import evaluate
from student_success.model import TrainConfig, build_for, stage_inputs, train
from student_success.nn import check_network
from student_success.nn.network import Inputs, MultiBranchNet, StageArchitecture
from student_success.preprocess import PrepConfig, prepare, scenario_splits, split_by_fafsa, treat_outliers
from student_success.preprocess.cleaning import resolve_inconsistencies
from student_success.preprocess.dataset import build_dataset, concat
from student_success.preprocess.engineer import engineer_features
from student_success.preprocess.impute import knn_fill
from student_success.records import exclude_ineligible
from student_success.staging import (
    REAPPEARANCE_WINDOW_DAYS, Direction, LabelClass, Scenario, Stage, assign_label, collapse, collapse_matrix,
)
from student_success.synth import DEFAULT_LATENT_EFFECTS, GenConfig, generate_cohort, simulate_cohort

ROOT = Path(__file__).resolve().parents[1]
COHORT_SEED = 11


@pytest.fixture
def verdict(capsys):
    def report(n, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {n:2d}] {'PASS' if ok else 'FAIL'}  {title}  {detail}")
        assert ok, f"criterion {n}: {title} {detail}"
    return report


@pytest.fixture(scope="module")
def cohort():
    return generate_cohort(GenConfig(n_students=5000, seed=COHORT_SEED))


@pytest.fixture(scope="module")
def prepared(cohort):
    return prepare(cohort, PrepConfig(seed=COHORT_SEED))


def test_gradient_fidelity(verdict):
    t0 = time.perf_counter()
    reports = dict(isolated_reports(seed=0))
    for branch in ("DenseStack", "ConvStack"):
        for stage in Stage:
            net, x, y = stage_net(stage, branch, n_classes=3, seed=int(stage))
            reports[f"stage{int(stage)}/{branch}"] = check_network(net, x, y, eps=1e-5, tolerance=1e-4)
    elapsed = time.perf_counter() - t0
    worst = max(r.max_rel_err for r in reports.values())
    failed = [k for k, r in reports.items() if not r.ok]
    verdict(1, "gradient fidelity", not failed and worst < 1e-4 and elapsed < 60,
            f"max rel err {worst:.2e} over {len(reports)} checks in {elapsed:.1f}s {failed or ''}")


def test_label_rule_oracle(verdict):
    t0 = time.perf_counter()
    coh = simulate_cohort(GenConfig(n_students=10000, seed=21, boundary_rate=0.3))
    horizon = coh.model.config.horizon
    agree = sum(assign_label(r.timeline, horizon) == want for r, want in zip(coh.records, coh.intended))
    boundary = 0
    for r in coh.records:
        t = r.timeline
        if t.reappearance_date is not None and (t.reappearance_date - t.last_enrollment).days == REAPPEARANCE_WINDOW_DAYS:
            boundary += 1
        elif (horizon - t.last_enrollment).days == REAPPEARANCE_WINDOW_DAYS:
            boundary += 1
    elapsed = time.perf_counter() - t0
    verdict(2, "label-rule oracle", agree == 10000 and boundary > 0 and elapsed < 10,
            f"{agree}/10000 agree, {boundary} cases at exactly {REAPPEARANCE_WINDOW_DAYS} days, {elapsed:.1f}s")


def test_scenario_collapse_identity(verdict):
    rng = np.random.default_rng(3)
    labels = list(LabelClass)
    dirs = list(Direction)
    truth = [(labels[i], dirs[j]) for i, j in zip(rng.integers(0, 4, 1000), rng.integers(0, 3, 1000))]
    pred = [(labels[i], dirs[j]) for i, j in zip(rng.integers(0, 4, 1000), rng.integers(0, 3, 1000))]
    full = evaluate([int(t[0]) for t in truth], [int(p[0]) for p in pred], 4)
    ok = []
    for s in Scenario:
        direct = evaluate([collapse(*t, s) for t in truth], [collapse(*p, s) for p in pred], s.class_count).counts
        if s is Scenario.SV:
            # the 12-way (label, direction) grid carries enough to collapse
            grid = {}
            for t, p in zip(truth, pred):
                grid[(t, p)] = grid.get((t, p), 0) + 1
            folded = np.zeros((2, 2), dtype=direct.dtype)
            for (t, p), c in grid.items():
                folded[collapse(*t, s), collapse(*p, s)] += c
        else:
            folded = collapse_matrix(full.counts, s)
        ok.append(bool((folded == direct).all()))
    verdict(3, "scenario-collapse identity", all(ok), f"{sum(ok)}/6 scenarios exact")


def test_stage_monotonicity(verdict, prepared, cohort):
    from student_success.synth import GenerativeModel

    t0 = time.perf_counter()
    bayes = GenerativeModel(GenConfig(n_students=5000, seed=COHORT_SEED)).bayes_accuracy(Scenario.SIII)
    accs = []
    for seed in range(5):
        sd = scenario_splits(prepared.dataset, Scenario.SIII, seed=seed)
        row = []
        for stage in Stage:
            cfg = TrainConfig(seed=seed)
            net = build_for(sd.train, stage, Scenario.SIII, cfg)
            h = train(net, stage_inputs(sd.train, stage), sd.y_train,
                      stage_inputs(sd.dev, stage), sd.y_dev, cfg).history
            row.append(h.dev_acc[h.best_epoch])
        accs.append(row)
    mean = np.mean(accs, axis=0)
    elapsed = time.perf_counter() - t0
    steps_ok = all(mean[i + 1] >= mean[i] - 0.02 for i in range(3))
    near_bayes = abs(mean[3] - bayes) <= 0.05
    verdict(4, "stage monotonicity", steps_ok and near_bayes and elapsed < 900,
            f"dev acc by stage {np.round(mean, 4).tolist()}, Bayes {bayes:.4f}, {elapsed:.0f}s")


def test_preprocessing_invariants(verdict, cohort, prepared, catalog):
    kept, _ = exclude_ineligible(cohort)
    kept = [resolve_inconsistencies(r, COHORT_SEED, catalog) for r in kept]
    raw = build_dataset(engineer_features(kept, catalog), catalog).dataset
    sparse = {f for f, frac in raw.missing_fraction().items() if frac > 0.8}
    ds = prepared.dataset
    checks = {
        "no missing": ds.missing_count() == 0 and not np.isnan(ds.fixed.values).any(),
        "sparse dropped": bool(sparse) and not sparse & set(ds.features) and sparse <= set(prepared.dropped_features),
    }
    once = treat_outliers(raw)
    twice = treat_outliers(once)
    checks["idempotent"] = all(np.array_equal(once.block(b).values, twice.block(b).values, equal_nan=True)
                               for b in ("fixed", "semesters", "years"))
    balanced, one_hot = True, True
    for scenario in (Scenario.SI, Scenario.SIII):
        sd = scenario_splits(ds, scenario, seed=0)
        counts = np.bincount(sd.y_train, minlength=scenario.class_count)
        balanced &= int(counts.max() - counts.min()) <= 1
        for part in (sd.train, sd.dev, sd.test):
            for name in ("fixed", "semesters", "years"):
                b = part.block(name)
                mask = part.mask_for(name)
                for f, cols in b.groups.items():
                    if len(cols) > 1 or "=" in b.columns[cols[0]]:
                        s = b.values[..., cols].sum(axis=-1)
                        one_hot &= bool(((s if mask is None else s[mask > 0]) == 1).all())
    checks["balanced"] = balanced
    checks["one-hot"] = one_hot
    bad = [k for k, v in checks.items() if not v]
    verdict(5, "preprocessing invariants", not bad,
            f"{ds.n} rows, {len(sparse)} sparse features dropped {'failed: ' + str(bad) if bad else ''}")


def test_knn_imputation_oracle(verdict):
    rng = np.random.default_rng(6)
    m = rng.normal(size=(50, 4)).round(3)
    m[rng.random(50) < 0.2, 0] = np.nan
    m[rng.random(50) < 0.1, 2] = np.nan
    got = knn_fill(m, 0, [1, 2, 3], 5)
    want = knn_oracle(m, 0, [1, 2, 3], 5)
    filled = int(np.isnan(m[:, 0]).sum())
    verdict(6, "KNN imputation oracle", filled > 0 and np.array_equal(got, want), f"{filled} cells filled, exact match")


def _linear_net(weights):
    weights = np.asarray(weights, dtype=float)
    net = MultiBranchNet(StageArchitecture(dense_units=(), head=(), n_classes=weights.shape[1]), weights.shape[0])
    net.set_state({"head.out.W": weights, "head.out.b": np.zeros(weights.shape[1])})
    return net


def test_attribution_recovery(verdict):
    planted = (("HS-GPA", 2.0), ("CROW-DISTANCE", 0.1), ("PAR-AGE", 0.1), ("HS-MATH-GRADE", 0.1), ("US-VET", 0.1))
    no_latent = {c: (0.0, 0.0, 0.0) for c in DEFAULT_LATENT_EFFECTS}
    wins, sd = 0, None
    for seed in range(10):
        recs = generate_cohort(GenConfig(n_students=4000, seed=seed, planted_effects=planted, latent_effects=no_latent))
        sd = scenario_splits(prepare(recs, PrepConfig(seed=seed)).dataset, Scenario.SIII, seed=seed,
                             fractions=(0.6, 0.2, 0.2))
        cfg = TrainConfig(seed=seed, epochs_max=30, dense_units=(32, 32), head=(16,), weight_decay=1e-3)
        net = train(build_for(sd.train, Stage.Stage1, Scenario.SIII, cfg), stage_inputs(sd.train, 1), sd.y_train,
                    stage_inputs(sd.dev, 1), sd.y_dev, cfg).model
        wins += permutation_importance(net, sd.test, sd.y_test, Stage.Stage1, repeats=5, seed=seed)[0].feature == "HS-GPA"

    # occlusion against a brute-force re-forward, on the last trained model
    feats = visible_features(sd.test, Stage.Stage1)
    ref = Reference.from_training(sd.train)
    x = stage_inputs(sd.test, Stage.Stage1).take(slice(0, 1))
    target, occ = occlusion_impacts(net, x, feats, ref)
    p0 = net.predict_proba(x)[0, target]
    occ_err = 0.0
    for k, (_, _, cols) in enumerate(feats):
        xo = x.fixed.copy()
        xo[0, cols] = ref.fixed[cols]
        occ_err = max(occ_err, abs(occ[k] - (p0 - net.predict_proba(Inputs(xo))[0, target])))

    rng = np.random.default_rng(0)
    W = rng.normal(size=(6, 3))
    lin = _linear_net(W)
    xl = Inputs(rng.normal(size=(1, 6)))
    fl = [("fixed", f"f{j}", [j]) for j in range(6)]
    gi_err = max(float(np.max(np.abs(gradinput_impacts(lin, xl, fl, t)[1] - W[:, t] * xl.fixed[0]))) for t in range(3))
    verdict(7, "attribution recovery", wins >= 9 and occ_err <= 1e-9 and gi_err <= 1e-9,
            f"planted feature #1 in {wins}/10 seeds, occlusion err {occ_err:.1e}, GradInput err {gi_err:.1e}")


def test_baseline_harness(verdict, prepared, tmp_path):
    t0 = time.perf_counter()
    sd = scenario_splits(prepared.dataset, Scenario.SI, seed=0)
    part = concat([sd.dev, sd.test])
    y = np.concatenate([sd.y_dev, sd.y_test])
    Xtr = bl.flatten(stage_inputs(sd.train, Stage.Stage2))
    Xev = bl.flatten(stage_inputs(part, Stage.Stage2))
    rows = bl.compare(Xtr, sd.y_train, Xev, y, 3, 2, "SI", bl.ALL_BASELINES)
    majority = np.bincount(y).max() / len(y)
    acc = {r[0]: r[bl.COMPARISON_COLUMNS.index("accuracy")] for r in rows}
    from student_success.metrics import csv_text

    path = tmp_path / "baselines.csv"
    path.write_text(csv_text("# acceptance", bl.COMPARISON_COLUMNS, rows))
    elapsed = time.perf_counter() - t0
    ok = len(acc) == 6 and all(a > majority for a in acc.values()) and elapsed < 300 and path.stat().st_size > 0
    verdict(8, "baseline harness", ok,
            f"majority {majority:.3f}; " + ", ".join(f"{k} {v:.3f}" for k, v in acc.items()) + f"; {elapsed:.0f}s")


def test_determinism(verdict, tmp_path):
    cfg = str(ROOT / "configs" / "smoke.cfg")
    outs = []
    for name in ("a", "b"):
        assert main(["all", "--config", cfg, "--out-dir", str(tmp_path / name)]) == 0
        outs.append(tmp_path / name)
    files = ("metrics.json", "recalls.csv", "student_reports.csv")
    same = [f for f in files if (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()]
    verdict(9, "determinism", len(same) == 3, f"{len(same)}/3 artifacts byte-identical")


def test_no_fafsa_split(verdict, prepared, catalog):
    ds = prepared.dataset
    fafsa, rest = split_by_fafsa(ds)
    exact = (fafsa.n + rest.n == ds.n and set(fafsa.ids).isdisjoint(rest.ids)
             and set(fafsa.ids) | set(rest.ids) == set(ds.ids))
    clean = not set(rest.features) & catalog.fafsa_ids()
    trained = []
    for part in (fafsa, rest):
        sd = scenario_splits(part, Scenario.SI, seed=0, fractions=(0.8, 0.1, 0.1))
        cfg = TrainConfig(epochs_max=3, dense_units=(16,), head=(8,), lstm_units=8)
        res = train(build_for(sd.train, Stage.Stage2, Scenario.SI, cfg), stage_inputs(sd.train, 2), sd.y_train,
                    stage_inputs(sd.dev, 2), sd.y_dev, cfg)
        trained.append(np.isfinite(res.history.dev_loss).all())
    verdict(10, "no-FAFSA cohort split", exact and clean and all(trained),
            f"{fafsa.n} with FAFSA, {rest.n} without, FAFSA columns removed: {clean}")
