"""Run configuration: defaults, key=value files, dotted overrides.

A config file is plain text, one `section.field = value` assignment per
line; `#` starts a comment line and blank lines are skipped. Command-line
overrides use the same dotted keys and take precedence over the file.
"""

from __future__ import annotations

import dataclasses

from .conditioning import CONDITIONING_CHANNELS
from .distill import DistillConfig
from .errors import ValidationError
from .signal import MelConfig
from .student import FlowConfig
from .teacher import TeacherConfig, TeacherTrainConfig


@dataclasses.dataclass
class RunConfig:
    mel: MelConfig
    teacher: TeacherConfig
    student: FlowConfig
    teacher_train: TeacherTrainConfig
    distill: DistillConfig

    def validate(self) -> None:
        self.mel.validate()
        self.teacher.validate()
        self.student.validate()
        self.teacher_train.validate()
        self.distill.validate()
        for name, cfg in (("teacher", self.teacher), ("student", self.student)):
            if cfg.conditioning_channels != CONDITIONING_CHANNELS:
                raise ValidationError(
                    f"{name}.conditioning_channels must be {CONDITIONING_CHANNELS} "
                    "(256 conditioner features + 48 embedding dims)"
                )


def default_config() -> RunConfig:
    return RunConfig(
        mel=MelConfig(),
        teacher=TeacherConfig(),
        student=FlowConfig(),
        teacher_train=TeacherTrainConfig(),
        distill=DistillConfig(),
    )


def config_from_dict(sections: dict) -> RunConfig:
    """Rebuild a RunConfig from checkpoint-style nested dicts.

    Missing sections fall back to defaults; unknown fields are rejected.
    """
    config = default_config()
    for name, cls in (
        ("mel", MelConfig),
        ("teacher", TeacherConfig),
        ("student", FlowConfig),
        ("teacher_train", TeacherTrainConfig),
        ("distill", DistillConfig),
    ):
        if name not in sections:
            continue
        fields = dict(sections[name])
        if name == "student" and "flow_layers" in fields:
            fields["flow_layers"] = tuple(int(v) for v in fields["flow_layers"])
        try:
            setattr(config, name, cls(**fields))
        except TypeError as exc:
            raise ValidationError(f"bad config section {name!r}: {exc}") from None
    return config


def parse_config_file(path) -> dict:
    """Read `key = value` assignments; returns {dotted_key: raw_string}."""
    try:
        lines = open(path, encoding="utf-8").read().splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}") from exc
    settings = {}
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValidationError(
                f"config file {path} line {lineno}: expected 'key = value', got {line!r}"
            )
        key, _, value = stripped.partition("=")
        settings[key.strip()] = value.strip()
    return settings


def _parse_value(raw: str, like) -> object:
    if isinstance(like, bool):
        lowered = raw.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    if isinstance(like, tuple):
        tokens = [t for t in raw.replace(",", " ").split() if t]
        if not tokens:
            raise ValueError("empty tuple")
        return tuple(int(t) for t in tokens)
    return raw


def apply_settings(config: RunConfig, settings: dict) -> RunConfig:
    """Apply {dotted_key: raw_string} assignments in place."""
    for key, raw in settings.items():
        section_name, dot, field_name = key.partition(".")
        if not dot:
            raise ValidationError(f"config key {key!r} must look like section.field")
        section = getattr(config, section_name, None)
        if section is None or not dataclasses.is_dataclass(section):
            raise ValidationError(f"unknown config section {section_name!r} in key {key!r}")
        if field_name not in {f.name for f in dataclasses.fields(section)}:
            raise ValidationError(f"unknown config field {key!r}")
        current = getattr(section, field_name)
        try:
            setattr(section, field_name, _parse_value(raw, current))
        except ValueError as exc:
            raise ValidationError(f"bad value for config key {key!r}: {exc}") from None
    return config


def load_config(path=None, overrides=()) -> RunConfig:
    """Defaults, then file assignments, then override strings `key=value`."""
    config = default_config()
    settings = {}
    if path is not None:
        settings.update(parse_config_file(path))
    for item in overrides or ():
        if "=" not in item:
            raise ValidationError(f"override {item!r} must look like section.field=value")
        key, _, value = item.partition("=")
        settings[key.strip()] = value.strip()
    apply_settings(config, settings)
    config.validate()
    return config
