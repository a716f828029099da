"""Training with a KL objective, checkpointing, evaluation and the ablation harness."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
import torch

from .corpus.clips import load_video_clips
from .corpus.gaze import fixation_pixels, fixations_by_frame
from .corpus.io import read_container, read_fixations_csv, resolve, write_container
from .errors import ConfigurationError, ContractError, TrainingDivergedError
from .metrics import METRIC_NAMES, ShuffleBank, evaluate_corpus, write_aggregates_json, write_rows_csv
from .network import ABLATIONS, AblationMask, ModelConfig, build_model, save_checkpoint

log = logging.getLogger(__name__)

KL_EPS = 1e-7
TABLE_COLUMNS = ["KL", "CC", "NSS", "SIM", "AUC", "s-AUC"]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 2  # scenes per step
    steps: int = 2000
    window: int = 8  # frames drawn from each scene per step
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    checkpoint_every: int = 500
    kl_eps: float = KL_EPS
    eval_splits: int = 100
    mask: AblationMask = field(default_factory=AblationMask)

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("steps", "seed"):
                if v < 0:
                    raise ConfigurationError(f"{f.name} must be >= 0, got {v}")
            elif isinstance(v, (int, float)) and not v > 0:
                raise ConfigurationError(f"{f.name} must be positive, got {v}")
        if not 0 < self.beta1 < 1 or not 0 < self.beta2 < 1:
            raise ConfigurationError("Adam betas must lie in (0, 1)")

    def to_dict(self):
        d = asdict(self)
        d["mask"] = asdict(self.mask)
        return d


def kl_loss(pred, gt, frame_mask=None, eps=KL_EPS):
    """Mean over frames of sum_i gt_i * ln(gt_i / (pred_i + eps) + eps).

    ``pred`` and ``gt`` are probability maps with identical shape (..., H, W);
    ``frame_mask`` (same leading shape) excludes padded frames.
    """
    if pred.shape != gt.shape:
        raise ContractError(f"prediction {tuple(pred.shape)} and ground truth {tuple(gt.shape)} differ")
    if pred.dim() < 2:
        raise ContractError("kl_loss needs maps with at least two dimensions")
    per_frame = (gt * torch.log(gt / (pred + eps) + eps)).sum(dim=(-2, -1))
    if frame_mask is None:
        return per_frame.mean()
    frame_mask = frame_mask.to(per_frame.dtype)
    return (per_frame * frame_mask).sum() / frame_mask.sum().clamp_min(1)


@dataclass
class SceneSample:
    video_id: str
    scene_id: int
    start: int
    frames: np.ndarray  # (T, 3, H, W)
    audio: np.ndarray
    audio_rate: int
    fps: float
    caption: str | None
    gt: np.ndarray  # (T, H, W)


def load_scene_samples(manifest, video_ids):
    """Preprocessed clips paired with their ground-truth maps."""
    out = []
    for vid in video_ids:
        gt, _ = read_container(resolve(manifest, vid, "gt"))
        meta = manifest.video(vid).meta
        for clip in load_video_clips(manifest, vid):
            out.append(SceneSample(vid, clip.scene_id, clip.start_frame, clip.frames, clip.audio, meta.audio_rate,
                                   clip.fps, clip.caption, gt[clip.start_frame:clip.end_frame + 1]))
    return out


def _audio_slice(sample, a, b):
    rate = sample.audio_rate / sample.fps
    n = int(round((b - a) * rate))
    seg = sample.audio[int(round(a * rate)):int(round(a * rate)) + n]
    return np.pad(seg, (0, n - len(seg))).astype(np.float32)


def make_batch(samples, starts, window, dtype=torch.float32):
    """Stack fixed-length windows; short scenes repeat their last frame and are masked."""
    frames, audio, gts, masks, caps = [], [], [], [], []
    for s, a in zip(samples, starts):
        b = min(a + window, len(s.frames))
        n = b - a
        idx = list(range(a, b)) + [b - 1] * (window - n)
        frames.append(s.frames[idx])
        g = s.gt[idx].astype(np.float64)
        gts.append(g / g.sum(axis=(1, 2), keepdims=True))
        masks.append([1.0] * n + [0.0] * (window - n))
        seg = _audio_slice(s, a, b)
        full = int(round(window * s.audio_rate / s.fps))
        audio.append(np.pad(seg, (0, full - len(seg))))
        caps.append(s.caption or "")
    return (torch.as_tensor(np.stack(frames), dtype=dtype), torch.as_tensor(np.stack(audio), dtype=dtype),
            caps, torch.as_tensor(np.stack(gts), dtype=dtype), torch.as_tensor(masks, dtype=dtype))


def draw_batch(rng, samples, cfg):
    idx = rng.integers(0, len(samples), size=cfg.batch_size)
    chosen = [samples[i] for i in idx]
    starts = [int(rng.integers(0, max(1, len(s.frames) - cfg.window + 1))) for s in chosen]
    return chosen, starts


def predict_scene(model, sample, dtype=torch.float32):
    frames = torch.as_tensor(sample.frames, dtype=dtype)[None]
    audio = torch.as_tensor(sample.audio, dtype=dtype)[None]
    with torch.no_grad():
        return model(frames, audio, [sample.caption or ""])[0].double().numpy()


def predict_video(model, samples):
    parts = sorted(samples, key=lambda s: s.start)
    return np.concatenate([predict_scene(model, s) for s in parts]).astype(np.float32)


def corpus_kl(model, samples, eps=KL_EPS):
    """Frame-averaged KL of the model against ground truth over whole scenes."""
    total, n = 0.0, 0
    for s in samples:
        p = torch.as_tensor(predict_scene(model, s))
        g = torch.as_tensor(s.gt, dtype=torch.float64)
        g = g / g.sum(dim=(1, 2), keepdim=True)
        total += float(kl_loss(p, g, eps=eps)) * len(s.gt)
        n += len(s.gt)
    return total / max(n, 1)


def fixation_cells(manifest, video_ids, dims):
    out = {}
    for vid in video_ids:
        meta = manifest.video(vid).meta
        per = fixations_by_frame(read_fixations_csv(resolve(manifest, vid, "fixations")), meta.n_frames)
        out[vid] = [fixation_pixels(recs, meta, dims) for recs in per]
    return out


def evaluate_model(model, manifest, video_ids, n_splits=100, seed=0, pred_dir=None):
    """Predict every frame of ``video_ids`` and score against ground truth and baselines."""
    dims = (model.config.height, model.config.width)
    model.eval()
    preds, gts = {}, {}
    by_video = {}
    for s in load_scene_samples(manifest, video_ids):
        by_video.setdefault(s.video_id, []).append(s)
    for vid in video_ids:
        preds[vid] = predict_video(model, by_video[vid])
        gts[vid] = read_container(resolve(manifest, vid, "gt"))[0]
        if pred_dir:
            os.makedirs(pred_dir, exist_ok=True)
            write_container(os.path.join(pred_dir, f"{vid}.vsal"), preds[vid], "probability")
    fx = fixation_cells(manifest, video_ids, dims)
    everything = fixation_cells(manifest, manifest.video_ids, dims)
    bank = ShuffleBank({(v, f): c for v, per in everything.items() for f, c in enumerate(per)}, dims, seed)
    return evaluate_corpus(preds, gts, fx, bank, n_splits, seed)


@dataclass
class TrainReport:
    losses: list
    initial_train_kl: float
    final_train_kl: float
    evaluation: dict | None
    config: dict
    model_config: dict
    checkpoints: list
    wall_clock_s: float = 0.0

    def to_dict(self):
        d = asdict(self)
        d.pop("wall_clock_s")
        return d


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_report(report, out_dir):
    """``report.json`` and ``losses.csv``; timing goes to a separate ``timing.json``."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(_clean(report.to_dict()), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "losses.csv"), "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["step", "loss"])
        for i, v in enumerate(report.losses):
            wr.writerow([i, repr(v)])
    with open(os.path.join(out_dir, "timing.json"), "w", encoding="utf-8") as fh:
        json.dump({"wall_clock_s": report.wall_clock_s}, fh)
        fh.write("\n")


def train(manifest, model_config=None, cfg=None, out_dir=None, evaluate=True, samples=None, measure_train_kl=True):
    """Optimize the KL objective on the training split.

    Returns ``(model, report)``. With ``out_dir``, checkpoints are written as
    ``step_<n>.pt`` every ``checkpoint_every`` steps plus ``final.pt``, and the
    report files alongside. A non-finite loss aborts with
    :class:`TrainingDivergedError` naming the last good checkpoint.
    """
    t0 = time.perf_counter()
    cfg = cfg or TrainConfig()
    model_config = model_config or ModelConfig.for_profile(manifest.profile)
    torch.use_deterministic_algorithms(True)
    train_ids = list(manifest.split.get("train") or manifest.video_ids)
    if samples is None:
        samples = load_scene_samples(manifest, train_ids)
    if not samples:
        raise ContractError("no training scenes")
    model = build_model(model_config, cfg.mask, seed=cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate, betas=(cfg.beta1, cfg.beta2), eps=cfg.adam_eps)
    rng = np.random.default_rng([cfg.seed, 7_411])
    ckpt_dir = os.path.join(out_dir, "checkpoints") if out_dir else None
    if ckpt_dir:
        os.makedirs(ckpt_dir, exist_ok=True)
    checkpoints, last_good = [], None

    def checkpoint(step, name=None):
        nonlocal last_good
        if not ckpt_dir:
            return
        path = os.path.join(ckpt_dir, name or f"step_{step:06d}.pt")
        save_checkpoint(path, model, step)
        checkpoints.append(os.path.relpath(path, out_dir))
        last_good = path

    model.eval()
    initial = corpus_kl(model, samples, cfg.kl_eps) if measure_train_kl else float("nan")
    checkpoint(0)
    losses = []
    for step in range(1, cfg.steps + 1):
        model.train()
        frames, audio, caps, gt, mask = make_batch(*draw_batch(rng, samples, cfg), cfg.window)
        loss = kl_loss(model(frames, audio, caps), gt, mask, cfg.kl_eps)
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingDivergedError(f"non-finite loss at step {step}", last_good)
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()
        losses.append(value)
        if step % 100 == 0:
            log.info("step %d loss %.4f", step, float(np.mean(losses[-100:])))
        if step % cfg.checkpoint_every == 0 and step != cfg.steps:
            checkpoint(step)
    checkpoint(cfg.steps, "final.pt")
    model.eval()
    final = corpus_kl(model, samples, cfg.kl_eps) if measure_train_kl else float("nan")
    evaluation = None
    test_ids = list(manifest.split.get("test") or [])
    if evaluate and test_ids:
        pred_dir = os.path.join(out_dir, "pred") if out_dir else None
        ev = evaluate_model(model, manifest, test_ids, cfg.eval_splits, cfg.seed, pred_dir)
        evaluation = {"per_video": ev.per_video, "corpus": ev.corpus}
        if out_dir:
            write_rows_csv(os.path.join(out_dir, "metrics_rows.csv"), ev.rows)
            write_aggregates_json(os.path.join(out_dir, "metrics.json"), ev)
    report = TrainReport(losses, initial, final, evaluation, cfg.to_dict(), json.loads(model_config.to_json()),
                         checkpoints, time.perf_counter() - t0)
    if out_dir:
        write_report(report, out_dir)
    return model, report


def run_ablation_suite(manifest, model_config=None, cfg=None, out_dir=None, masks=None):
    """Train and evaluate each ablation with identical seeds and schedules.

    Returns rows ``[(name, {column: value})]`` in table order (full model first).
    """
    cfg = cfg or TrainConfig()
    masks = masks or ABLATIONS
    train_ids = list(manifest.split.get("train") or manifest.video_ids)
    test_ids = list(manifest.split.get("test") or [])
    if not test_ids:
        raise ContractError("ablation suite needs a non-empty test split")
    samples = load_scene_samples(manifest, train_ids)
    table = []
    for name, mask in masks.items():
        run_cfg = replace(cfg, mask=mask)
        model, _ = train(manifest, model_config, run_cfg, evaluate=False, samples=samples, measure_train_kl=False)
        ev = evaluate_model(model, manifest, test_ids, cfg.eval_splits, cfg.seed)
        c = ev.corpus["model"]
        table.append((name, dict(zip(TABLE_COLUMNS, (c[m] for m in METRIC_NAMES)))))
    if out_dir:
        write_ablation_csv(os.path.join(out_dir, "ablation.csv"), table)
    return table


def write_ablation_csv(path, table):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["model"] + TABLE_COLUMNS)
        for name, vals in table:
            wr.writerow([name] + ["" if math.isnan(vals[c]) else repr(vals[c]) for c in TABLE_COLUMNS])
