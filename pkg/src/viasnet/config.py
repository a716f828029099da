"""Run configuration: one JSON file, validated in full before any work starts."""

from __future__ import annotations

import difflib
import json
from dataclasses import replace
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .corpus.synth import SynthConfig
from .errors import ConfigurationError
from .network import ABLATIONS, AblationMask, ModelConfig
from .trainer import KL_EPS, TrainConfig


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Paths(_Section):
    corpus: str = "out/corpus"
    output: str = "out"
    checkpoint: Optional[str] = None


class CorpusSection(_Section):
    n_videos: int = Field(12, gt=0)
    scenes_per_video: float = Field(5.0, gt=0)
    frames_per_scene: float = Field(36.0, gt=0)
    viewers_per_video: int = Field(20, gt=0)
    fps: float = Field(24.0, gt=0)
    width: int = Field(160, gt=0)
    height: int = Field(90, gt=0)
    audio_rate: int = Field(8000, gt=0)
    clutter_fraction: float = Field(0.06, ge=0, le=1)
    gt_sigma_deg: float = Field(1.0, gt=0)
    screen_distance_cm: float = Field(60.0, gt=0)
    screen_width_cm: float = Field(53.1, gt=0)
    screen_height_cm: float = Field(29.9, gt=0)
    ivt_threshold_deg_s: float = Field(30.0, gt=0)
    scene_threshold: float = Field(0.3, gt=0)
    min_scene_len: int = Field(6, gt=0)
    test_fraction: float = Field(0.2, gt=0, lt=1)


class CaptionsSection(_Section):
    provider: Literal["stub", "http"] = "stub"
    cache: bool = True


class ModelSection(_Section):
    fusion_dim: Optional[int] = Field(None, gt=0)
    fusion_heads: Optional[int] = Field(None, gt=0)
    text_dim: Optional[int] = Field(None, gt=0)
    text_layers: Optional[int] = Field(None, gt=0)
    readout_channels: Optional[int] = Field(None, gt=0)
    readout_mid: Optional[int] = Field(None, gt=0)
    blur_sigma: Optional[float] = Field(None, gt=0)
    t_max: Optional[int] = Field(None, gt=0)
    ablation: str = "Full"

    @model_validator(mode="after")
    def _known_ablation(self):
        if self.ablation not in ABLATIONS:
            raise ValueError(f"unknown ablation {self.ablation!r}; choose from {list(ABLATIONS)}")
        return self


class TrainSection(_Section):
    learning_rate: float = Field(1e-4, gt=0)
    batch_size: int = Field(2, gt=0)
    steps: int = Field(2000, ge=0)
    window: int = Field(8, gt=0)
    beta1: float = Field(0.9, gt=0, lt=1)
    beta2: float = Field(0.999, gt=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)
    checkpoint_every: int = Field(500, gt=0)
    kl_eps: float = Field(KL_EPS, gt=0)


class MetricsSection(_Section):
    n_splits: int = Field(100, gt=0)


class DiagnosticsSection(_Section):
    bins: int = Field(40, gt=0)
    plots: bool = True


class RunConfig(_Section):
    profile: Literal["desk", "paper"] = "desk"
    seed: int = Field(7, ge=0)
    paths: Paths = Paths()
    corpus: CorpusSection = CorpusSection()
    captions: CaptionsSection = CaptionsSection()
    model: ModelSection = ModelSection()
    train: TrainSection = TrainSection()
    metrics: MetricsSection = MetricsSection()
    diagnostics: DiagnosticsSection = DiagnosticsSection()

    def synth_config(self):
        c = self.corpus
        base = SynthConfig.desk() if self.profile == "desk" else SynthConfig()
        keep = {k: getattr(c, k) for k in (
            "n_videos", "scenes_per_video", "frames_per_scene", "viewers_per_video", "fps", "width", "height",
            "audio_rate", "clutter_fraction", "gt_sigma_deg", "screen_distance_cm", "screen_width_cm",
            "screen_height_cm", "test_fraction") if k in c.model_fields_set}
        return replace(base, **keep)

    def model_config_obj(self):
        overrides = {k: v for k, v in self.model.model_dump().items() if v is not None and k != "ablation"}
        return ModelConfig.for_profile(self.profile, **overrides)

    def ablation_mask(self) -> AblationMask:
        return ABLATIONS[self.model.ablation]

    def train_config(self):
        return TrainConfig(**self.train.model_dump(), seed=self.seed, eval_splits=self.metrics.n_splits,
                           mask=self.ablation_mask())


class ConfigErrors(ConfigurationError):
    """All validation problems of one config, each as ``key.path: message``."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid config:\n" + "\n".join(f"  {e}" for e in self.errors))


def _section_fields(model_cls, loc):
    cls = model_cls
    for part in loc:
        field = cls.model_fields.get(part) if isinstance(part, str) else None
        if field is None or not isinstance(field.annotation, type) or not issubclass(field.annotation, BaseModel):
            return None
        cls = field.annotation
    return list(cls.model_fields)


def _format_errors(exc):
    out = []
    for err in exc.errors():
        loc = [p for p in err["loc"] if p not in ("function-after",)]
        path = ".".join(str(p) for p in loc) or "<root>"
        if err["type"] == "extra_forbidden":
            choices = _section_fields(RunConfig, loc[:-1]) or []
            near = difflib.get_close_matches(str(loc[-1]), choices, n=1, cutoff=0.6)
            hint = f"; did you mean {'.'.join(map(str, loc[:-1] + [near[0]]))!r}?" if near else ""
            out.append(f"{path}: unknown key{hint}")
        else:
            out.append(f"{path}: {err['msg']}")
    return out


def _coerce(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc, overrides):
    """``overrides`` are ``key.path=value`` strings; values parse as JSON when possible."""
    doc = json.loads(json.dumps(doc))
    for item in overrides:
        if "=" not in item:
            raise ConfigErrors([f"{item}: override must look like key.path=value"])
        key, value = item.split("=", 1)
        node = doc
        parts = key.strip().split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigErrors([f"{key}: {p} is not a section"])
        node[parts[-1]] = _coerce(value)
    return doc


def validate_document(doc):
    if not isinstance(doc, dict):
        raise ConfigErrors(["<root>: config must be a JSON object"])
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigErrors(_format_errors(exc)) from None


def load_document(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigErrors([f"{path}: cannot read ({exc.strerror})"]) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigErrors([f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"]) from None


def validate_config(path, overrides=()):
    """Parse and validate a config file; raises :class:`ConfigErrors` listing every problem."""
    return validate_document(apply_overrides(load_document(path), overrides))
