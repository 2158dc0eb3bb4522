"""Accuracy grows as the model sees more semesters and years.

Prepares one cohort, then trains a small multi-branch net for each stage of
Scenario III (graduate vs. at risk).  Takes a minute or two on one core.

Run:  python3 demos/staged_models.py
"""

from student_success.model import TrainConfig, build_for, stage_inputs, train
from student_success.preprocess import PrepConfig, prepare, scenario_splits
from student_success.staging import Scenario, Stage
from student_success.synth import GenConfig, GenerativeModel, generate_cohort

gen = GenConfig(n_students=2500, seed=8)
prepared = prepare(generate_cohort(gen), PrepConfig(seed=8))
print(f"{prepared.dataset.n} labeled rows; dropped sparse features: {prepared.dropped_features[:5]} ...")

sd = scenario_splits(prepared.dataset, Scenario.SIII, seed=0, fractions=(0.8, 0.1, 0.1))
print("balanced training rows:", sd.train.n, "(before balancing:", sd.train_unbalanced, ")")

cfg = TrainConfig(epochs_max=25, dense_units=(64, 64), head=(32,), lstm_units=32, weight_decay=1e-4)
for stage in Stage:
    net = build_for(sd.train, stage, Scenario.SIII, cfg)
    res = train(net, stage_inputs(sd.train, stage), sd.y_train, stage_inputs(sd.dev, stage), sd.y_dev, cfg)
    test_acc = (res.model.predict(stage_inputs(sd.test, stage)) == sd.y_test).mean()
    print(f"stage {int(stage)}: semesters={stage.semester_slices} years={stage.year_slices} "
          f"test accuracy {test_acc:.3f} (best epoch {res.history.best_epoch})")

print(f"ceiling from the generator: {GenerativeModel(gen).bayes_accuracy(Scenario.SIII):.3f}")
