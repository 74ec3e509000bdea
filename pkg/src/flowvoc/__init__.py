"""Flow vocoder: a parallel flow student distilled from an autoregressive teacher.

The pipeline: 24 kHz audio -> log-mel features plus a 48-dim variational
utterance embedding -> an autoregressive mixture-of-logistics teacher ->
probability-density distillation into a feed-forward flow stack -> one-pass
synthesis. Evaluation covers objective spectral metrics and listening-test
statistics (relative MUSHRA, Holm-corrected paired t-tests).
"""

from .checkpoint import Checkpoint, load_checkpoint, load_module_state, save_checkpoint
from .conditioning import (
    CONDITIONING_CHANNELS,
    EMBEDDING_DIM,
    AudioEmbeddingPosterior,
    AudioEncoder,
    MelConditioner,
    combine_and_upsample,
    kl_to_standard_prior,
    sample_embedding,
)
from .config import (
    RunConfig,
    apply_settings,
    config_from_dict,
    default_config,
    load_config,
    parse_config_file,
)
from .data import (
    UtteranceRecord,
    generate_tone_corpus,
    read_manifest,
    resolve_audio_path,
    write_manifest,
)
from .distill import (
    DistillConfig,
    DistillLossReport,
    cross_entropy_vs_teacher,
    distill_loss,
    distill_student,
    power_loss,
    student_entropy,
)
from .errors import (
    AudioIOError,
    CheckpointError,
    DivergenceError,
    FlowvocError,
    ValidationError,
)
from .evaluation import (
    MetricReport,
    PairedTestResult,
    RatingSet,
    evaluate_pairs,
    holm_rejections,
    load_ratings_csv,
    log_spectral_distance,
    mel_distortion,
    paired_t_holm,
    relative_mushra,
    student_t_two_sided_p,
)
from .signal import (
    SAMPLE_RATE,
    MelConfig,
    MelSpectrogram,
    MelStats,
    PowerSpectrogram,
    TrainingClip,
    Waveform,
    compute_mel_stats,
    extract_mel,
    load_waveform,
    mel_filterbank,
    resample,
    save_waveform,
    slice_clip,
    standardize_mel,
    stft_power,
)
from .student import (
    AffineFlow,
    FlowConfig,
    FlowOutput,
    FlowStack,
    invert_flow,
    sample_noise,
)
from .synthesis import RtfReport, SynthesisRequest, Synthesizer
from .teacher import (
    MoLParams,
    TeacherConfig,
    TeacherTrainConfig,
    WaveNetTeacher,
    mol_log_density,
    mol_log_likelihood,
    mol_sample,
    teacher_nll,
    train_teacher,
)
from .training import ClipBatch, CorpusCache, MetricsLog, beta_schedule, block_means

__version__ = "0.1.0"
