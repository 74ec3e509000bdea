"""
Listening-test analysis: relative MUSHRA and paired t-tests
===========================================================

Builds a small ratings file in the CSV layout the stats tooling expects and
runs the two analyses used for reporting: the relative MUSHRA score (system
mean over natural mean) and Holm-corrected paired t-tests on per-utterance
means.
"""

import csv
import os

import numpy as np

from flowvoc.evaluation import load_ratings_csv, paired_t_holm, relative_mushra

root = os.path.join(os.path.dirname(__file__), "_artifacts")
os.makedirs(root, exist_ok=True)
path = os.path.join(root, "ratings.csv")

# Simulated panel: 12 listeners rate 8 utterances under three systems.
# "parallel" sits a few points below natural; "autoregressive" is closer.
rng = np.random.default_rng(0)
systems = {"natural": 85.0, "autoregressive": 83.0, "parallel": 71.5}
with open(path, "w", newline="") as fh:
    writer = csv.writer(fh)
    writer.writerow(["listener_id", "utterance_id", "system_id", "score"])
    for u in range(8):
        utterance_shift = rng.normal(0.0, 2.0)
        for listener in range(12):
            listener_shift = rng.normal(0.0, 4.0)
            for system, base in systems.items():
                score = base + utterance_shift + listener_shift + rng.normal(0.0, 2.0)
                writer.writerow((f"l{listener:02d}", f"u{u}", system, round(float(np.clip(score, 0, 100)), 2)))

ratings = load_ratings_csv(path)
print(f"{len(ratings.listeners)} listeners x {len(ratings.utterances)} utterances "
      f"x {len(ratings.systems)} systems")

# Relative MUSHRA: each system's grand mean as a percentage of natural's.
for system in ("autoregressive", "parallel"):
    value = relative_mushra(ratings, system, "natural")
    print(f"relative MUSHRA, {system:>15s} vs natural: {value:6.2f} %")

# Paired t-tests pair per-utterance means (averaged across listeners), so
# listener offsets cancel. Holm correction runs across the family.
results = paired_t_holm(
    ratings,
    [("natural", "parallel"), ("natural", "autoregressive"), ("autoregressive", "parallel")],
    alpha=0.05,
)
for r in results:
    verdict = "reject H0" if r.reject else "keep H0"
    print(f"{r.system_a:>15s} vs {r.system_b:<15s} n={r.n_pairs} t={r.t_stat:+.3f} "
          f"p={r.p_value:.5f} -> {verdict}")
