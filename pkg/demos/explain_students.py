"""Which features matter, overall and for one student.

Trains a Stage-2 Scenario I model, ranks features by permutation importance,
splits the top ones by class, and prints two advisor-style rows.

Run:  python3 demos/explain_students.py
"""

from student_success.attribution import Reference, per_label_contribution, permutation_importance
from student_success.model import TrainConfig, build_for, stage_inputs, train
from student_success.preprocess import PrepConfig, prepare, scenario_splits
from student_success.report import student_reports
from student_success.staging import Scenario, Stage
from student_success.synth import GenConfig, generate_cohort

stage, scenario = Stage.Stage2, Scenario.SI
prepared = prepare(generate_cohort(GenConfig(n_students=2000, seed=2)), PrepConfig(seed=2))
sd = scenario_splits(prepared.dataset, scenario, seed=2, fractions=(0.7, 0.15, 0.15))

cfg = TrainConfig(epochs_max=20, dense_units=(64, 64), head=(32,), lstm_units=16)
net = train(build_for(sd.train, stage, scenario, cfg), stage_inputs(sd.train, stage), sd.y_train,
            stage_inputs(sd.dev, stage), sd.y_dev, cfg).model

overall = permutation_importance(net, sd.test, sd.y_test, stage, repeats=3)
print("top features by accuracy drop when shuffled:")
for e in overall[:8]:
    print(f"  {e.rank:2d}. {e.feature:<24} {e.score:+.4f}")

top, ratios = per_label_contribution(net, sd.test, sd.y_test, stage, 5, scenario.class_count,
                                     repeats=3, importance=overall)
print("\nshare of each class's recall loss:")
print("  " + " " * 24 + "".join(f"{c:>10}" for c in scenario.class_names))
for f, row in zip(top, ratios):
    print(f"  {f:<24}" + "".join(f"{v:10.2f}" for v in row))

rows = student_reports(net, sd.test, stage, scenario, top_k=3, reference=Reference.from_training(sd.train))
print("\nhighest-risk students:")
for r in rows[:2]:
    probs = ", ".join(f"{c}={p:.2f}" for c, p in zip(scenario.class_names, r.probabilities))
    drivers = ", ".join(f"{f} ({v:+.3f})" for f, v in r.impacts)
    print(f"  {r.student_id}: {probs}; drivers: {drivers}")
