"""
Probability density distillation: teacher to parallel student
=============================================================

Loads the teacher checkpoint from demo 02 and distills the flow student
against it. The student never sees a likelihood directly: its loss is the
KL against the teacher's predictive distribution (cross-entropy minus its
own entropy) plus an averaged-power-spectrum penalty.

Run demos/02_train_teacher.py first.
"""

import json
import os

from flowvoc.config import default_config
from flowvoc.distill import DistillConfig, distill_student
from flowvoc.student import FlowConfig

root = os.path.join(os.path.dirname(__file__), "_artifacts")
teacher_ckpt = os.path.join(root, "teacher", "teacher.ckpt")
manifest = os.path.join(root, "tones", "manifest.jsonl")
if not os.path.exists(teacher_ckpt):
    raise SystemExit("run demos/02_train_teacher.py first")

# The student: two flows of two layers each here; the full model uses
# [10, 10, 10, 30]. Teacher architecture comes from the checkpoint, and the
# conditioning networks are copied from it and frozen.
cfg = default_config()
cfg.student = FlowConfig(flow_layers=(2, 2), residual_channels=16)
cfg.distill = DistillConfig(
    steps=240,
    batch_size=4,
    clip_seconds=0.0625,
    learning_rate=5e-4,
    mc_samples=1,            # one noise draw per step
    quadrature_points=8,     # teacher density averaged over 8 student quantiles
    power_loss_weight=1e-5,
    log_interval=10,
    seed=2,
)

student_ckpt = distill_student(teacher_ckpt, manifest, cfg, os.path.join(root, "student"))
print(f"student checkpoint: {student_ckpt}")

# The metrics log decomposes the loss. Cross-entropy should fall toward the
# entropy term (their gap estimates the KL to the teacher, up to the
# quadrature offset), and the power term should collapse once amplitudes match.
rows = [json.loads(line) for line in open(os.path.join(root, "student", "metrics.jsonl"))]
for row in rows[:: max(1, len(rows) // 6)]:
    print(f"step {row['step']:4d}: total {row['total']:8.3f}  "
          f"ce {row['cross_entropy']:6.3f}  H {row['entropy']:6.3f}  "
          f"power {row['power']:10.1f}")
