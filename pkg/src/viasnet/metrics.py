"""Saliency evaluation: KL, CC, NSS, SIM, AUC and shuffled AUC, plus corpus aggregation."""

from __future__ import annotations

import csv
import json
import math
import zlib
from dataclasses import astuple, dataclass, fields

import numpy as np

from . import kernels
from .corpus.types import SaliencyMap
from .errors import ConfigurationError, ContractError

KL_EPS = 1e-7
METRIC_NAMES = ("kl", "cc", "nss", "sim", "auc", "sauc")


def _values(m):
    return np.asarray(m.values if isinstance(m, SaliencyMap) else m, dtype=np.float64)


def _probability(m, name):
    if isinstance(m, SaliencyMap):
        m.require("probability")
    v = _values(m)
    if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-3:
        raise ContractError(f"{name} is not a probability map (sum={v.sum():.6g})")
    return v


def metric_kl(pred, gt, eps=KL_EPS):
    """sum_i gt_i * ln(gt_i / (pred_i + eps) + eps)."""
    p = _probability(pred, "pred")
    g = _probability(gt, "gt")
    if p.shape != g.shape:
        raise ContractError(f"shape mismatch {p.shape} vs {g.shape}")
    return float(np.sum(g * np.log(g / (p + eps) + eps)))


def metric_cc(pred, gt):
    """Pearson correlation; NaN when both maps are constant, 0 when exactly one is."""
    p, g = _values(pred).ravel(), _values(gt).ravel()
    if p.shape != g.shape:
        raise ContractError(f"shape mismatch {p.shape} vs {g.shape}")
    p_const, g_const = np.ptp(p) == 0, np.ptp(g) == 0
    if p_const and g_const:
        return float("nan")
    if p_const or g_const:
        return 0.0
    pc, gc = p - p.mean(), g - g.mean()
    sp, sg = math.sqrt(np.dot(pc, pc)), math.sqrt(np.dot(gc, gc))
    return float(np.dot(pc, gc) / (sp * sg))


def _fix(fixations):
    fx = np.asarray(fixations, dtype=np.int64).reshape(-1, 2)
    return fx[:, 0], fx[:, 1]


def metric_nss(pred, fixations):
    """Mean of the standardized map at fixated (row, col) cells; NaN without fixations."""
    p = _values(pred)
    rows, cols = _fix(fixations)
    if rows.size == 0:
        return float("nan")
    # ptp rather than std: the mean of identical values can round, leaving a tiny std
    if np.ptp(p) == 0:
        return 0.0
    z = (p - p.mean()) / p.std()
    return float(z[rows, cols].mean())


def metric_sim(pred, gt):
    p = _probability(pred, "pred")
    g = _probability(gt, "gt")
    if p.shape != g.shape:
        raise ContractError(f"shape mismatch {p.shape} vs {g.shape}")
    return float(np.minimum(p, g).sum())


def frame_rng(seed, key=None):
    if key is None:
        return np.random.default_rng(seed)
    video_id, frame_idx = key
    return np.random.default_rng([seed, zlib.crc32(str(video_id).encode()), int(frame_idx)])


class ShuffleBank:
    """Fixation cells from other frames, used as negatives for shuffled AUC.

    By default the whole video under evaluation is excluded, which also
    guarantees the frame's own fixations never appear.
    """

    def __init__(self, fixations_by_key, shape, seed=0, exclude_video=True):
        self.shape = tuple(shape)
        self.seed = seed
        self.exclude_video = exclude_video
        keys = sorted(fixations_by_key)
        coords, owners_v, owners_f = [], [], []
        self.videos = sorted({k[0] for k in keys})
        vindex = {v: i for i, v in enumerate(self.videos)}
        for i, key in enumerate(keys):
            fx = np.asarray(fixations_by_key[key], dtype=np.int64).reshape(-1, 2)
            coords.append(fx)
            owners_v.append(np.full(len(fx), vindex[key[0]]))
            owners_f.append(np.full(len(fx), i))
        self.keys = keys
        self._kindex = {k: i for i, k in enumerate(keys)}
        self._vindex = vindex
        self.coords = np.concatenate(coords) if coords else np.zeros((0, 2), dtype=np.int64)
        self.owner_video = np.concatenate(owners_v) if owners_v else np.zeros(0, dtype=np.int64)
        self.owner_frame = np.concatenate(owners_f) if owners_f else np.zeros(0, dtype=np.int64)

    def __len__(self):
        return len(self.coords)

    def pool(self, key=None):
        """Cells available as negatives for frame ``key = (video_id, frame_idx)``."""
        if key is None:
            return self.coords
        if self.exclude_video and key[0] in self._vindex and len(self.videos) > 1:
            keep = self.owner_video != self._vindex[key[0]]
        else:
            keep = self.owner_frame != self._kindex.get(tuple(key), -1)
        return self.coords[keep]


def metric_auc(pred, fixations, mode="borji", bank=None, n_splits=100, seed=0, key=None, negatives=None):
    """ROC area of fixated cells against sampled negatives, averaged over ``n_splits``.

    ``mode="borji"`` draws negatives uniformly over the map; ``"shuffled"``
    draws them from ``bank`` cells fixated in other frames. Each split uses
    as many negatives as there are positives. ``negatives="all"`` uses every
    pixel once instead (exhaustive, borji mode only).
    """
    p = _values(pred)
    rows, cols = _fix(fixations)
    if rows.size == 0:
        return float("nan")
    pos = p[rows, cols]
    if mode == "borji" and negatives == "all":
        return kernels.auc_rank(pos, p.ravel())
    rng = frame_rng(seed, key)
    if mode == "borji":
        flat = p.ravel()
        scores = [kernels.auc_rank(pos, flat[rng.integers(0, flat.size, size=pos.size)]) for _ in range(n_splits)]
    elif mode == "shuffled":
        if bank is None or len(bank) == 0:
            raise ConfigurationError("shuffled AUC needs a non-empty ShuffleBank")
        cells = bank.pool(key)
        if len(cells) == 0:
            raise ConfigurationError(f"shuffle bank has no negatives for {key}")
        negv = p[cells[:, 0], cells[:, 1]]
        scores = [kernels.auc_rank(pos, negv[rng.integers(0, negv.size, size=pos.size)]) for _ in range(n_splits)]
    else:
        raise ConfigurationError(f"unknown AUC mode {mode!r}")
    return float(np.mean(scores))


@dataclass
class MetricRow:
    video_id: str
    frame_idx: int
    kl: float
    cc: float
    nss: float
    sim: float
    auc: float
    sauc: float
    model: str = "model"


def evaluate_frame(pred, gt, fixations, bank, video_id, frame_idx, n_splits=100, seed=0, model="model"):
    key = (video_id, frame_idx)
    has_fix = len(fixations) > 0
    return MetricRow(
        video_id, frame_idx,
        metric_kl(pred, gt), metric_cc(pred, gt),
        metric_nss(pred, fixations) if has_fix else float("nan"),
        metric_sim(pred, gt),
        metric_auc(pred, fixations, "borji", n_splits=n_splits, seed=seed, key=key) if has_fix else float("nan"),
        metric_auc(pred, fixations, "shuffled", bank, n_splits, seed, key) if has_fix and bank is not None else float("nan"),
        model,
    )


def uniform_map(shape):
    return np.full(shape, 1.0 / (shape[0] * shape[1]))


def center_map(shape, sigma=None):
    h, w = shape
    sigma = sigma or 0.25 * min(h, w)
    ys = np.arange(h) + 0.5 - h / 2.0
    xs = np.arange(w) + 0.5 - w / 2.0
    g = np.exp(-(ys[:, None] ** 2 + xs[None, :] ** 2) / (2 * sigma * sigma))
    return g / g.sum()


def _nanmean(values):
    vals = [v for v in values if not math.isnan(v)]
    return float(sum(vals) / len(vals)) if vals else float("nan")


def aggregate(rows):
    """Mean over frames within each video, then over videos. Returns ``(per_video, corpus)``."""
    by_video = {}
    for r in rows:
        by_video.setdefault(r.video_id, []).append(r)
    per_video = {v: {m: _nanmean([getattr(r, m) for r in rs]) for m in METRIC_NAMES}
                 for v, rs in sorted(by_video.items())}
    corpus = {m: _nanmean([pv[m] for pv in per_video.values()]) for m in METRIC_NAMES}
    return per_video, corpus


@dataclass
class Evaluation:
    rows: list
    per_video: dict  # model -> video -> metric -> value
    corpus: dict  # model -> metric -> value


def evaluate_corpus(preds, gts, fixations, bank=None, n_splits=100, seed=0, baselines=True):
    """Score every frame of every video.

    ``preds``/``gts`` map video id to (n_frames, H, W) probability maps and
    ``fixations`` maps video id to a per-frame list of (row, col) cells.
    Baseline rows (``uniform``, ``center``) are added when ``baselines``.
    """
    rows = []
    models = ["model"] + (["uniform", "center"] if baselines else [])
    for vid in sorted(preds):
        pred, gt = np.asarray(preds[vid]), np.asarray(gts[vid])
        fx = fixations[vid]
        if pred.shape != gt.shape or len(fx) != len(gt):
            raise ContractError(f"{vid}: pred {pred.shape}, gt {gt.shape}, {len(fx)} fixation frames")
        shape = gt.shape[1:]
        base = {"uniform": uniform_map(shape), "center": center_map(shape)}
        for name in models:
            for f in range(len(gt)):
                p = pred[f].astype(np.float64) if name == "model" else base[name]
                p = p / p.sum()
                g = gt[f].astype(np.float64)
                rows.append(evaluate_frame(p, g / g.sum(), fx[f], bank, vid, f, n_splits, seed, name))
    per_video, corpus = {}, {}
    for name in models:
        pv, c = aggregate([r for r in rows if r.model == name])
        per_video[name], corpus[name] = pv, c
    return Evaluation(rows, per_video, corpus)


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_rows_csv(path, rows):
    names = [f.name for f in fields(MetricRow)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(names)
        for r in rows:
            wr.writerow([_fmt(v) for v in astuple(r)])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


def write_aggregates_json(path, evaluation):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable({"per_video": evaluation.per_video, "corpus": evaluation.corpus}), fh,
                  indent=2, sort_keys=True)
        fh.write("\n")
