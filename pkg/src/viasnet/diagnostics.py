"""Entropy-based engagement diagnostics for predicted saliency maps."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .corpus.types import SaliencyMap
from .errors import ConfigurationError, ContractError

ENTROPY_UNIT = "nats"


def entropy(pmap):
    """Shannon entropy in nats, with 0 ln 0 = 0."""
    if isinstance(pmap, SaliencyMap):
        pmap.require("probability")
        pmap = pmap.values
    p = np.asarray(pmap, dtype=np.float64).ravel()
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-3:
        raise ContractError(f"entropy needs a probability map (sum={p.sum():.6g})")
    nz = p[p > 0]
    return float(max(0.0, -np.sum(nz * np.log(nz))))


def fixation_dispersion(points, width, height):
    """RMS distance of fixations to their centroid, in units of the frame diagonal.

    ``points`` are (x, y) pixel pairs. Returns NaN for fewer than two fixations.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 2:
        return float("nan")
    d = pts - pts.mean(axis=0)
    return float(math.sqrt(np.mean(np.sum(d * d, axis=1))) / math.hypot(width, height))


def percentile_thresholds(values):
    """(p10, p90) with linear interpolation between order statistics."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size < 10:
        raise ConfigurationError(f"need at least 10 values for p10/p90, got {v.size}")
    p10, p90 = np.percentile(v, [10, 90], method="linear")
    return float(p10), float(p90)


def tag_frames(values, p10, p90):
    return ["low" if v < p10 else "high" if v > p90 else "mid" for v in values]


@dataclass
class EntropyProfile:
    video_id: str
    entropy: np.ndarray
    scenes: list  # inclusive (start, end)
    scene_mean: list = field(default_factory=list)
    scene_sd: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def entropy_profile(video_id, maps, scenes):
    """Per-frame entropy of (n_frames, H, W) probability maps with scene and video statistics."""
    maps = np.asarray(maps)
    n = len(maps)
    covered = [f for a, b in scenes for f in range(a, b + 1)]
    if covered != list(range(n)):
        raise ContractError(f"{video_id}: scene boundaries do not partition {n} frames")
    ent = np.array([entropy(m / m.sum(dtype=np.float64)) for m in maps])
    means = [float(ent[a:b + 1].mean()) for a, b in scenes]
    sds = [float(ent[a:b + 1].std()) for a, b in scenes]
    p10, p90 = np.percentile(ent, [10, 90]) if n else (float("nan"),) * 2
    summary = {"mean": float(ent.mean()), "median": float(np.median(ent)), "p10": float(p10), "p90": float(p90)}
    return EntropyProfile(video_id, ent, list(scenes), means, sds, summary)


def pearson(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ac, bc = a - a.mean(), b - b.mean()
    den = math.sqrt(np.dot(ac, ac) * np.dot(bc, bc))
    return float(np.dot(ac, bc) / den) if den > 0 else float("nan")


def flagged_scenes(profiles, p90):
    return [{"video_id": p.video_id, "scene_id": k, "start_frame": a, "end_frame": b, "mean_entropy": m}
            for p in profiles for k, ((a, b), m) in enumerate(zip(p.scenes, p.scene_mean)) if m > p90]


@dataclass
class EngagementReport:
    p10: float
    p90: float
    histogram: tuple  # (counts, edges)
    scene_scatter: list
    video_summaries: list
    progression: dict
    flags: list
    entropy_correlation: float | None = None


def engagement_report(profiles, gt_profiles=None, dispersions=None, bins=40):
    if not profiles:
        raise ContractError("engagement_report needs at least one profile")
    pooled = np.concatenate([p.entropy for p in profiles])
    p10, p90 = percentile_thresholds(pooled)
    counts, edges = np.histogram(pooled, bins=bins)
    scatter = [{"video_id": p.video_id, "scene_id": k, "mean": m, "sd": s}
               for p in profiles for k, (m, s) in enumerate(zip(p.scene_mean, p.scene_sd))]
    summaries = [{"video_id": p.video_id, **p.summary, "n_frames": int(len(p.entropy))} for p in profiles]
    progression = {}
    for p in profiles:
        scene_of = np.empty(len(p.entropy), dtype=np.int64)
        for k, (a, b) in enumerate(p.scenes):
            scene_of[a:b + 1] = k
        disp = (dispersions or {}).get(p.video_id)
        progression[p.video_id] = [
            {"frame_idx": f, "entropy": float(e), "scene_id": int(scene_of[f]),
             "tag": tag_frames([e], p10, p90)[0],
             "dispersion": (float(disp[f]) if disp is not None else float("nan"))}
            for f, e in enumerate(p.entropy)
        ]
    corr = None
    if gt_profiles:
        gt_by = {g.video_id: g for g in gt_profiles}
        pred_all = np.concatenate([p.entropy for p in profiles if p.video_id in gt_by])
        gt_all = np.concatenate([gt_by[p.video_id].entropy for p in profiles if p.video_id in gt_by])
        corr = pearson(pred_all, gt_all)
    return EngagementReport(p10, p90, (counts, edges), scatter, summaries, progression,
                            flagged_scenes(profiles, p90), corr)


def _num(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([_num(r[h]) for h in header])


def _plots(report, profiles, out_dir):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plot_dir = os.path.join(out_dir, "plots")
    os.makedirs(plot_dir, exist_ok=True)
    meta = {"Software": None}
    counts, edges = report.histogram
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(edges[:-1], counts, width=np.diff(edges), align="edge", color="0.6")
    for x, lab in ((report.p10, "p10"), (report.p90, "p90")):
        ax.axvline(x, color="k", ls="--")
        ax.text(x, max(counts.max(), 1), lab, ha="center", va="bottom")
    ax.set_xlabel(f"entropy ({ENTROPY_UNIT})")
    ax.set_ylabel("frames")
    fig.tight_layout()
    fig.savefig(os.path.join(plot_dir, "histogram.png"), metadata=meta)
    plt.close(fig)

    fig, (a1, a2) = plt.subplots(1, 2, figsize=(10, 3.5))
    a1.scatter([s["mean"] for s in report.scene_scatter], [s["sd"] for s in report.scene_scatter], s=10)
    a1.set_xlabel("scene mean entropy")
    a1.set_ylabel("scene SD")
    a2.violinplot([p.entropy for p in profiles], showmedians=True)
    a2.set_xticks(range(1, len(profiles) + 1), [p.video_id for p in profiles], rotation=90)
    a2.set_ylabel("entropy")
    fig.tight_layout()
    fig.savefig(os.path.join(plot_dir, "scenes_and_videos.png"), metadata=meta)
    plt.close(fig)

    for p in profiles:
        fig, ax = plt.subplots(figsize=(8, 2.5))
        ax.plot(p.entropy, lw=1)
        ax.axhline(report.p90, color="r", ls="--", lw=0.8)
        for a, _ in p.scenes[1:]:
            ax.axvline(a, color="0.7", lw=0.6)
        ax.set_xlabel("frame")
        ax.set_ylabel("entropy")
        ax.set_title(p.video_id)
        fig.tight_layout()
        fig.savefig(os.path.join(plot_dir, f"progression_{p.video_id}.png"), metadata=meta)
        plt.close(fig)


def write_bundle(report, profiles, out_dir, plots=True):
    """Write CSV/JSON data files (and PNG plots) for the report under ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    counts, edges = report.histogram
    _write_csv(os.path.join(out_dir, "histogram.csv"), ["bin_lo", "bin_hi", "count"],
               [{"bin_lo": float(edges[i]), "bin_hi": float(edges[i + 1]), "count": int(counts[i])}
                for i in range(len(counts))])
    _write_csv(os.path.join(out_dir, "scene_scatter.csv"), ["video_id", "scene_id", "mean", "sd"],
               report.scene_scatter)
    _write_csv(os.path.join(out_dir, "video_summaries.csv"),
               ["video_id", "n_frames", "mean", "median", "p10", "p90"], report.video_summaries)
    files = ["histogram.csv", "scene_scatter.csv", "video_summaries.csv"]
    for vid, rows in sorted(report.progression.items()):
        name = f"progression_{vid}.csv"
        _write_csv(os.path.join(out_dir, name), ["frame_idx", "entropy", "scene_id", "tag", "dispersion"], rows)
        files.append(name)
    with open(os.path.join(out_dir, "flags.json"), "w", encoding="utf-8") as fh:
        json.dump(report.flags, fh, indent=2, sort_keys=True)
        fh.write("\n")
    files.append("flags.json")
    if plots:
        _plots(report, profiles, out_dir)
        files += sorted(os.path.join("plots", f) for f in os.listdir(os.path.join(out_dir, "plots")))
    corr = report.entropy_correlation
    index = {
        "entropy_unit": ENTROPY_UNIT,
        "p10": report.p10,
        "p90": report.p90,
        "entropy_correlation": None if corr is None or math.isnan(corr) else corr,
        "n_videos": len(profiles),
        "n_flagged_scenes": len(report.flags),
        "files": files,
    }
    with open(os.path.join(out_dir, "index.json"), "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return index
