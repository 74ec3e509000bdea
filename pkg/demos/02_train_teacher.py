"""
Teacher training: autoregressive WaveNet on a toy tone corpus
=============================================================

Generates a small synthetic corpus, trains a reduced teacher for a couple of
hundred steps, and inspects the NLL curve and checkpoint contents. Artifacts
land in demos/_artifacts/ for the later demos to reuse.

Takes about two minutes on a laptop CPU.
"""

import os

from flowvoc.checkpoint import load_checkpoint
from flowvoc.config import default_config
from flowvoc.data import generate_tone_corpus
from flowvoc.student import FlowConfig
from flowvoc.teacher import TeacherConfig, TeacherTrainConfig, train_teacher
from flowvoc.training import block_means

root = os.path.join(os.path.dirname(__file__), "_artifacts")

# Eight classes of steady tones (4 pitches x sine/sawtooth), 6 clips each.
manifest = generate_tone_corpus(os.path.join(root, "tones"), clips_per_class=6,
                                duration=0.25, seed=7)
print(f"corpus manifest: {manifest}")

# A reduced teacher: 8 layers over 2 dilation cycles, 32 channels. The full
# model (24 layers, 4 cycles) has a 504-sample receptive field; this one
# still spans several pitch periods, which is all steady tones need.
cfg = default_config()
cfg.teacher = TeacherConfig(layers=8, dilation_cycle=2, residual_channels=32,
                            gate_channels=32, skip_channels=32)
cfg.student = FlowConfig(flow_layers=(2, 2), residual_channels=16)
cfg.teacher_train = TeacherTrainConfig(
    steps=240,
    batch_size=4,
    clip_seconds=0.0625,     # 1500-sample training excerpts
    learning_rate=1e-3,
    kl_warmup_steps=60,      # beta ramps 0 -> 1 over the first 60 steps
    log_interval=10,
    seed=1,
)

ckpt_path = train_teacher(manifest, cfg, os.path.join(root, "teacher"))
print(f"teacher checkpoint: {ckpt_path}")

# The checkpoint carries the NLL curve; block means smooth out batch noise.
ckpt = load_checkpoint(ckpt_path)
nll = [v for _, v in ckpt.manifest["loss_curve"]]
blocks = block_means(nll, 4)
print(f"nll: start {nll[0]:.2f} -> end {nll[-1]:.2f}")
print("block means:", " -> ".join(f"{b:.2f}" for b in blocks))
print(f"components stored: {ckpt.components}")
print(f"trained for {ckpt.step} steps")
