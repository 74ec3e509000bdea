"""Objective metrics and listening-test statistics.

Objective side: log-spectral distance and mel distortion between reference
and synthesized waveforms. Subjective side: relative MUSHRA (system mean as a
percentage of the reference-system mean) and paired two-sided t-tests over
per-utterance means with Holm step-down correction across comparisons.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math

import numpy as np
import scipy.special

from .errors import ValidationError
from .signal import MelConfig, Waveform, extract_mel, stft_power

RATINGS_HEADER = ("listener_id", "utterance_id", "system_id", "score")


def _trimmed_samples(reference, synthesis):
    ref = reference.samples if isinstance(reference, Waveform) else np.asarray(reference)
    syn = synthesis.samples if isinstance(synthesis, Waveform) else np.asarray(synthesis)
    n = min(ref.shape[0], syn.shape[0])
    if n < 1:
        raise ValidationError("empty waveform in metric computation")
    return ref[:n], syn[:n]


def log_spectral_distance(
    reference,
    synthesis,
    window_length: int = 1200,
    hop_length: int = 300,
    power_floor: float = 1e-12,
) -> float:
    """RMS difference of 10*log10 power spectra in dB.

    Waveforms are truncated to the shorter length. The floor only guards
    log(0); identical inputs give exactly 0 and a uniform gain g shifts every
    unfloored bin by 20*log10(g).
    """
    ref, syn = _trimmed_samples(reference, synthesis)
    pr = stft_power(ref, window_length, hop_length).power
    ps = stft_power(syn, window_length, hop_length).power
    lr = 10.0 * np.log10(np.maximum(pr, power_floor))
    ls = 10.0 * np.log10(np.maximum(ps, power_floor))
    return float(np.sqrt(np.mean((lr - ls) ** 2)))


def mel_distortion(reference, synthesis, config: MelConfig | None = None) -> float:
    """RMS difference of log-mel features (natural-log units)."""
    config = config or MelConfig()
    ref, syn = _trimmed_samples(reference, synthesis)
    mr = extract_mel(Waveform(np.asarray(ref, dtype=np.float32)), config).frames
    ms = extract_mel(Waveform(np.asarray(syn, dtype=np.float32)), config).frames
    return float(np.sqrt(np.mean((mr.astype(np.float64) - ms.astype(np.float64)) ** 2)))


@dataclasses.dataclass
class MetricReport:
    """Per-utterance and aggregate objective metrics."""

    per_utterance: list
    aggregate: dict

    def to_json(self) -> str:
        return json.dumps(
            {"per_utterance": self.per_utterance, "aggregate": self.aggregate},
            indent=2,
            sort_keys=True,
        )


def evaluate_pairs(pairs, config: MelConfig | None = None) -> MetricReport:
    """Metrics for (utterance_id, reference_waveform, synthesis_waveform) triples."""
    config = config or MelConfig()
    rows = []
    for utterance_id, reference, synthesis in pairs:
        rows.append(
            {
                "utterance_id": str(utterance_id),
                "log_spectral_distance_db": log_spectral_distance(
                    reference, synthesis, config.window_length, config.hop_length
                ),
                "mel_distortion": mel_distortion(reference, synthesis, config),
            }
        )
    if not rows:
        raise ValidationError("no utterance pairs to evaluate")
    aggregate = {
        "count": len(rows),
        "log_spectral_distance_db": float(
            np.mean([r["log_spectral_distance_db"] for r in rows])
        ),
        "mel_distortion": float(np.mean([r["mel_distortion"] for r in rows])),
    }
    return MetricReport(per_utterance=rows, aggregate=aggregate)


@dataclasses.dataclass
class RatingSet:
    """Listening-test scores keyed by (listener, utterance, system)."""

    scores: dict

    @property
    def systems(self) -> list:
        return sorted({k[2] for k in self.scores})

    @property
    def listeners(self) -> list:
        return sorted({k[0] for k in self.scores})

    @property
    def utterances(self) -> list:
        return sorted({k[1] for k in self.scores})

    def system_scores(self, system: str) -> np.ndarray:
        values = [v for (_, _, s), v in self.scores.items() if s == system]
        if not values:
            raise ValidationError(f"no ratings for system {system!r}")
        return np.asarray(values, dtype=np.float64)

    def check_complete(self, systems) -> None:
        """Every (listener, utterance) block must rate every given system."""
        blocks = {(l, u) for (l, u, s) in self.scores if s in systems}
        for listener, utterance in sorted(blocks):
            for system in systems:
                if (listener, utterance, system) not in self.scores:
                    raise ValidationError(
                        f"incomplete rating block: listener {listener!r}, utterance "
                        f"{utterance!r} has no score for system {system!r}"
                    )

    def utterance_means(self, system: str) -> dict:
        """Mean score across listeners, per utterance."""
        sums, counts = {}, {}
        for (listener, utterance, sys_id), value in self.scores.items():
            if sys_id == system:
                sums[utterance] = sums.get(utterance, 0.0) + value
                counts[utterance] = counts.get(utterance, 0) + 1
        if not sums:
            raise ValidationError(f"no ratings for system {system!r}")
        return {u: sums[u] / counts[u] for u in sums}


def load_ratings_csv(path) -> RatingSet:
    """Parse a ratings CSV with header listener_id,utterance_id,system_id,score.

    Scores must lie in [0, 100]; duplicate (listener, utterance, system) rows
    are rejected.
    """
    try:
        f = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read ratings file {path}: {exc}") from exc
    with f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"ratings file {path} is empty") from None
        if tuple(h.strip() for h in header) != RATINGS_HEADER:
            raise ValidationError(
                f"ratings file {path} must start with header {','.join(RATINGS_HEADER)}"
            )
        scores = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValidationError(f"ratings file {path} line {lineno}: expected 4 fields")
            listener, utterance, system = (v.strip() for v in row[:3])
            try:
                value = float(row[3])
            except ValueError:
                raise ValidationError(
                    f"ratings file {path} line {lineno}: score {row[3]!r} is not a number"
                ) from None
            if not math.isfinite(value) or not 0.0 <= value <= 100.0:
                raise ValidationError(
                    f"ratings file {path} line {lineno}: score {value} outside [0, 100]"
                )
            key = (listener, utterance, system)
            if key in scores:
                raise ValidationError(f"ratings file {path} line {lineno}: duplicate rating {key}")
            scores[key] = value
    if not scores:
        raise ValidationError(f"ratings file {path} contains no ratings")
    return RatingSet(scores=scores)


def relative_mushra(ratings: RatingSet, system: str, reference: str) -> float:
    """100 * mean(system scores) / mean(reference scores)."""
    ratings.check_complete((system, reference))
    system_mean = float(ratings.system_scores(system).mean())
    reference_mean = float(ratings.system_scores(reference).mean())
    if reference_mean <= 0.0:
        raise ValidationError(f"reference system {reference!r} has non-positive mean score")
    return 100.0 * system_mean / reference_mean


def student_t_two_sided_p(t_stat: float, dof: int) -> float:
    """Two-sided p-value via the regularized incomplete beta function."""
    if dof < 1:
        raise ValidationError("t-test needs at least 1 degree of freedom")
    t2 = float(t_stat) ** 2
    return float(scipy.special.betainc(dof / 2.0, 0.5, dof / (dof + t2)))


def holm_rejections(p_values, alpha: float = 0.05) -> list:
    """Holm step-down: reject in ascending-p order while p <= alpha / (m - rank)."""
    p = np.asarray(p_values, dtype=np.float64)
    if p.size == 0:
        return []
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ValidationError("p-values must lie in [0, 1]")
    if not 0 < alpha < 1:
        raise ValidationError("alpha must be in (0, 1)")
    m = p.size
    reject = [False] * m
    for rank, idx in enumerate(np.argsort(p, kind="stable")):
        if p[idx] <= alpha / (m - rank):
            reject[int(idx)] = True
        else:
            break
    return reject


@dataclasses.dataclass
class PairedTestResult:
    """One paired comparison after Holm correction."""

    system_a: str
    system_b: str
    n_pairs: int
    t_stat: float
    p_value: float
    reject: bool
    zero_variance: bool


def paired_t_holm(ratings: RatingSet, comparisons, alpha: float = 0.05) -> list:
    """Paired two-sided t-tests over per-utterance means, Holm-corrected.

    The pairing unit is the utterance: scores are averaged across listeners
    per (utterance, system) first. A comparison whose paired differences
    have zero variance gets p = 1.0 and is flagged, never rejected.
    """
    comparisons = list(comparisons)
    if not comparisons:
        raise ValidationError("no comparisons given")
    results = []
    for system_a, system_b in comparisons:
        ratings.check_complete((system_a, system_b))
        means_a = ratings.utterance_means(system_a)
        means_b = ratings.utterance_means(system_b)
        utterances = sorted(means_a)
        diffs = np.asarray([means_a[u] - means_b[u] for u in utterances])
        n = diffs.size
        if n < 2:
            raise ValidationError(
                f"comparison {system_a} vs {system_b} needs at least 2 paired utterances"
            )
        sd = float(diffs.std(ddof=1))
        if sd == 0.0:
            results.append(
                PairedTestResult(system_a, system_b, n, 0.0, 1.0, False, True)
            )
            continue
        t_stat = float(diffs.mean()) / (sd / math.sqrt(n))
        p_value = student_t_two_sided_p(t_stat, n - 1)
        results.append(
            PairedTestResult(system_a, system_b, n, t_stat, p_value, False, False)
        )
    for result, reject in zip(results, holm_rejections([r.p_value for r in results], alpha)):
        result.reject = bool(reject) and not result.zero_variance
    return results
