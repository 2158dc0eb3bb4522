"""Generate a synthetic cohort and look at what the labels are made of.

Run:  python3 demos/cohort_and_labels.py
"""

from collections import Counter

from student_success.staging import Scenario, Unlabeled
from student_success.synth import GenConfig, simulate_cohort

cohort = simulate_cohort(GenConfig(n_students=3000, seed=4, boundary_rate=0.1))

# Every record carries the label the generator intended; the label rule must agree.
mix = Counter(x.name if not isinstance(x, Unlabeled) else x.value for x in cohort.intended)
print("outcome mix:", dict(sorted(mix.items())))
print("students with a FAFSA record:", sum(r.has_fafsa for r in cohort.records))

# The generator knows the true class probabilities, so the best achievable
# accuracy per scenario is a Monte-Carlo integral, not a guess.
for s in Scenario:
    acc = cohort.model.bayes_accuracy(s, draws=100000)
    print(f"{s.name:>4}  classes={','.join(s.class_names):<36} Bayes accuracy {acc:.3f}")

r = cohort.records[0]
print("\nfirst record:", r.student_id, "fixed features:", len(r.fixed),
      "semesters:", len(r.semesters), "years:", len(r.years))
