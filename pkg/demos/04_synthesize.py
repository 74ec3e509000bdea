"""
Synthesis: parallel generation, copy-synthesis metrics, real-time factor
========================================================================

Uses the distilled checkpoint from demo 03 three ways: free synthesis from
mel features, copy synthesis of a reference clip (with the objective
metrics), and a real-time-factor measurement.

Run demos/02 and 03 first.
"""

import os

import numpy as np

from flowvoc.data import read_manifest, resolve_audio_path
from flowvoc.evaluation import evaluate_pairs
from flowvoc.signal import extract_mel, load_waveform, save_waveform
from flowvoc.synthesis import SynthesisRequest, Synthesizer

root = os.path.join(os.path.dirname(__file__), "_artifacts")
student_ckpt = os.path.join(root, "student", "student.ckpt")
manifest = os.path.join(root, "tones", "manifest.jsonl")
if not os.path.exists(student_ckpt):
    raise SystemExit("run demos/02_train_teacher.py and demos/03_distill_student.py first")

synth = Synthesizer(student_ckpt)

# Pick a reference clip and rebuild it from its own features (copy synthesis).
record = read_manifest(manifest)[0]
reference = load_waveform(resolve_audio_path(manifest, record))
resyn = synth.resynthesize(reference, embedding_mode="from_reference", seed=0)
save_waveform(os.path.join(root, "resynthesis.wav"), resyn)
print(f"resynthesized {record.utterance_id}: {resyn.duration:.3f} s")

# Objective metrics for the pair. After the short demo training run these are
# rough; the acceptance suite trains longer and checks them properly.
report = evaluate_pairs([(record.utterance_id, reference, resyn)])
print(f"log-spectral distance: {report.aggregate['log_spectral_distance_db']:.2f} dB")
print(f"mel distortion:        {report.aggregate['mel_distortion']:.3f}")

# Free synthesis from features alone, with the embedding at the prior mean
# (e = 0). This is the deployment path: no reference audio needed.
mel = extract_mel(reference).frames
wave = synth.synthesize(SynthesisRequest(mel=mel, embedding_mode="zero", seed=0))
save_waveform(os.path.join(root, "synthesis.wav"), wave)
print(f"free synthesis: {mel.shape[0]} frames -> {wave.samples.shape[0]} samples")

# Same request, same seed: generation is deterministic.
again = synth.synthesize(SynthesisRequest(mel=mel, embedding_mode="zero", seed=0))
print(f"deterministic: {np.array_equal(wave.samples, again.samples)}")

# One parallel pass per utterance; RTF is wall-clock time / audio duration.
rtf = synth.measure_rtf(mel, trials=3)
print(f"real-time factor: median {rtf.median_rtf:.4f} over {rtf.trials} trials "
      f"({rtf.audio_seconds:.2f} s of audio)")
