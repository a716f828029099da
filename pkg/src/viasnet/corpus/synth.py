"""Deterministic synthetic video-ad corpus with simulated eye tracking.

Each video is a sequence of hard-cut scenes. A scene has a flat background
and one or more moving Gaussian blobs; blobs "pulse" (grow and brighten)
once per scene, with a tone burst in the audio at the same time. Viewers
look at a known mixture of a centre prior and the blobs, weighted toward
pulsing blobs. The mixture is persisted so ground-truth maps can be checked
against it. Some scenes are marked cluttered: many blobs and a weak centre
prior, so gaze spreads out.
"""

from __future__ import annotations

import colorsys
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..profiles import profile_dims
from .gaze import ScreenGeometry, classify_fixations_ivt, default_sigma_px, detect_fixations, video_gt_maps
from .io import (dump_json, save_manifest, write_container, write_fixations_csv, write_gaze_csv, write_wav)
from .preprocess import preprocess_frames
from .scenes import detect_scenes
from .split import split_corpus
from .types import CorpusManifest, GazeSample, VideoAdMeta, VideoEntry


@dataclass
class SynthConfig:
    n_videos: int = 151
    scenes_per_video: float = 15.6
    frames_per_scene: float = 51.5
    min_scene_frames: int = 8
    viewers_per_video: int = 20
    fps: float = 24.0
    width: int = 1920
    height: int = 1080
    audio_rate: int = 16000
    gaze_rate: float = 100.0
    blobs_per_scene: tuple = (1, 2)
    clutter_fraction: float = 0.06
    clutter_blobs: int = 10
    center_weight: float = 0.1
    clutter_center_weight: float = 0.04
    center_sigma_frac: float = 0.12
    blob_radius_frac: float = 0.06
    gaze_spread_frac: float = 0.5
    pulse_frames: int = 8
    pulse_gain: float = 3.0
    fixation_ms: tuple = (180, 420)
    min_saccade_deg: float = 3.5
    jitter_deg: float = 0.005
    viewer_offset_deg: float = 0.3
    eye_offset_deg: float = 0.1
    gt_sigma_deg: float = 1.0
    screen_distance_cm: float = 60.0
    screen_width_cm: float = 53.1
    screen_height_cm: float = 29.9
    test_fraction: float = 0.2

    @classmethod
    def desk(cls, **overrides):
        base = cls(n_videos=12, scenes_per_video=5.0, frames_per_scene=36.0, width=160, height=90,
                   audio_rate=8000)
        return replace(base, **overrides)

    @property
    def geometry(self):
        return ScreenGeometry(self.screen_distance_cm, self.screen_width_cm, self.screen_height_cm,
                              self.width, self.height)

    def to_dict(self):
        d = asdict(self)
        d["blobs_per_scene"] = list(self.blobs_per_scene)
        d["fixation_ms"] = list(self.fixation_ms)
        return d


@dataclass
class BlobPlan:
    hue: float
    radius: float
    pos: np.ndarray  # (n_scene_frames, 2) x, y in source pixels
    pulse_start: int  # scene-relative frame
    pulse_len: int

    def pulsing(self, k):
        return self.pulse_start <= k < self.pulse_start + self.pulse_len

    @property
    def tone_hz(self):
        return 220.0 + 660.0 * self.hue


@dataclass
class ScenePlan:
    scene_id: int
    start: int
    end: int
    background: tuple  # h, s, v in [0, 1]
    blobs: list = field(default_factory=list)
    cluttered: bool = False

    @property
    def n_frames(self):
        return self.end - self.start + 1


@dataclass
class VideoPlan:
    video_id: str
    index: int
    scenes: list

    @property
    def n_frames(self):
        return self.scenes[-1].end + 1

    def scene_at(self, frame):
        for s in self.scenes:
            if s.start <= frame <= s.end:
                return s
        raise IndexError(frame)


def _video_rng(seed, index, stream):
    return np.random.default_rng([seed, index, stream])


def _scene_lengths(cfg, rng):
    n = max(1, 1 + int(rng.poisson(max(cfg.scenes_per_video - 1.0, 0.0))))
    shape = 4.0
    lengths = [max(cfg.min_scene_frames, int(round(rng.gamma(shape, cfg.frames_per_scene / shape))))
               for _ in range(n)]
    return lengths


def _hue_dist(a, b):
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


def _pick_background(rng, prev):
    for _ in range(200):
        h, s, v = rng.uniform(0, 1), rng.uniform(0.35, 0.85), rng.uniform(0.15, 0.5)
        if prev is None or (_hue_dist(h, prev[0]) > 0.15 and abs(s - prev[1]) > 0.15 and abs(v - prev[2]) > 0.1):
            return (float(h), float(s), float(v))
    return (float((prev[0] + 0.5) % 1.0), float(0.35 if prev[1] > 0.6 else 0.85), float(0.15 if prev[2] > 0.33 else 0.5))


def _plan_blobs(cfg, rng, n_frames, n_blobs, bg_hue):
    blobs = []
    margin = cfg.blob_radius_frac * cfg.width
    for _ in range(n_blobs):
        hue = float(rng.uniform(0, 1))
        while _hue_dist(hue, bg_hue) < 0.25:
            hue = float(rng.uniform(0, 1))
        radius = cfg.blob_radius_frac * cfg.width * float(rng.uniform(0.8, 1.2))
        p = np.array([rng.uniform(margin, cfg.width - margin), rng.uniform(margin, cfg.height - margin)])
        angle = rng.uniform(0, 2 * math.pi)
        speed = rng.uniform(0.003, 0.012) * cfg.width
        v = speed * np.array([math.cos(angle), math.sin(angle)])
        lo = np.array([margin, margin])
        hi = np.array([cfg.width - margin, cfg.height - margin])
        pos = np.empty((n_frames, 2))
        for k in range(n_frames):
            pos[k] = p
            p = p + v
            for ax in range(2):
                if p[ax] < lo[ax] or p[ax] > hi[ax]:
                    v[ax] = -v[ax]
                    p[ax] = min(max(p[ax], lo[ax]), hi[ax])
        pulse_len = min(cfg.pulse_frames, n_frames)
        pulse_start = int(rng.integers(0, n_frames - pulse_len + 1))
        blobs.append(BlobPlan(hue, radius, pos, pulse_start, pulse_len))
    return blobs


def plan_corpus(cfg, seed):
    """Scene/blob layout for every video, including the cluttered-scene choice."""
    skeleton = []
    for i in range(cfg.n_videos):
        rng = _video_rng(seed, i, 0)
        skeleton.append(_scene_lengths(cfg, rng))
    total = sum(len(s) for s in skeleton)
    n_clutter = max(1, int(round(cfg.clutter_fraction * total))) if cfg.clutter_fraction > 0 else 0
    flat = [(i, j) for i, lengths in enumerate(skeleton) for j in range(len(lengths))]
    chosen = set()
    if n_clutter:
        pick = np.random.default_rng([seed, 1_000_003]).choice(len(flat), size=min(n_clutter, total), replace=False)
        chosen = {flat[k] for k in pick}
    plans = []
    for i, lengths in enumerate(skeleton):
        rng = _video_rng(seed, i, 1)
        scenes, start, prev = [], 0, None
        for j, n in enumerate(lengths):
            bg = _pick_background(rng, prev)
            prev = bg
            cluttered = (i, j) in chosen
            lo, hi = cfg.blobs_per_scene
            n_blobs = cfg.clutter_blobs if cluttered else int(rng.integers(lo, hi + 1))
            scenes.append(ScenePlan(j, start, start + n - 1, bg, _plan_blobs(cfg, rng, n, n_blobs, bg[0]), cluttered))
            start += n
        plans.append(VideoPlan(f"v{i:03d}", i, scenes))
    return plans


def render_frames(plan, cfg):
    """RGB frames in [0, 1], float32 (n_frames, 3, height, width)."""
    h, w = cfg.height, cfg.width
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float32) + 0.5
    out = np.empty((plan.n_frames, 3, h, w), dtype=np.float32)
    for scene in plan.scenes:
        bh, bs, bv = scene.background
        shade = (bv + 0.08 * (yy / h - 0.5)).clip(0, 1)
        base = np.stack([np.full((h, w), c, dtype=np.float32) for c in colorsys.hsv_to_rgb(bh, bs, 1.0)])
        bg = base * shade[None]
        for k in range(scene.n_frames):
            img = bg.copy()
            for blob in scene.blobs:
                pulse = blob.pulsing(k)
                r = blob.radius * (1.3 if pulse else 1.0)
                x, y = blob.pos[k]
                alpha = (0.95 if pulse else 0.8) * np.exp(-((xx - x) ** 2 + (yy - y) ** 2) / (2 * r * r))
                col = np.asarray(colorsys.hsv_to_rgb(blob.hue, 0.9, 1.0), dtype=np.float32)[:, None, None]
                img = img * (1 - alpha) + col * alpha
            out[scene.start + k] = img
    return out


def render_audio(plan, cfg, seed):
    rate = cfg.audio_rate
    n = int(round(plan.n_frames / cfg.fps * rate))
    rng = _video_rng(seed, plan.index, 2)
    audio = 0.02 * rng.standard_normal(n)
    t = np.arange(n) / rate

    def burst(t0, freq, dur, amp):
        a = int(round(t0 * rate))
        b = min(n, a + int(round(dur * rate)))
        if b <= a:
            return
        env = np.hanning(b - a)
        audio[a:b] += amp * env * np.sin(2 * np.pi * freq * (t[a:b] - t0))

    for scene in plan.scenes:
        burst(scene.start / cfg.fps, 150.0, 0.08, 0.3)
        for blob in scene.blobs:
            burst((scene.start + blob.pulse_start) / cfg.fps, blob.tone_hz, 0.15, 0.6)
    return np.clip(audio, -1.0, 1.0)


def mixture_components(cfg, scene, k):
    """(weights, means (m, 2), sigmas (m,)) of the gaze mixture at scene frame ``k``."""
    wc = cfg.clutter_center_weight if scene.cluttered else cfg.center_weight
    sal = np.array([cfg.pulse_gain if b.pulsing(k) else 1.0 for b in scene.blobs])
    weights = np.concatenate([[wc], (1 - wc) * sal / sal.sum()])
    means = np.vstack([[cfg.width / 2.0, cfg.height / 2.0]] + [b.pos[k] for b in scene.blobs])
    sigmas = np.array([cfg.center_sigma_frac * cfg.width] + [cfg.gaze_spread_frac * b.radius for b in scene.blobs])
    return weights, means, sigmas


def true_fields(plan, cfg, dims):
    """The generative gaze density on the (H, W) grid, probability-normalized per frame."""
    h, w = dims
    xs = (np.arange(w) + 0.5) * (cfg.width / w)
    ys = (np.arange(h) + 0.5) * (cfg.height / h)
    out = np.empty((plan.n_frames, h, w), dtype=np.float64)
    for scene in plan.scenes:
        for k in range(scene.n_frames):
            weights, means, sigmas = mixture_components(cfg, scene, k)
            field_ = np.zeros((h, w))
            for wgt, (mx, my), sg in zip(weights, means, sigmas):
                gx = np.exp(-((xs - mx) ** 2) / (2 * sg * sg))
                gy = np.exp(-((ys - my) ** 2) / (2 * sg * sg))
                field_ += wgt / (2 * math.pi * sg * sg) * np.outer(gy, gx)
            out[scene.start + k] = field_ / field_.sum()
    return out


def sample_mixture(rng, cfg, scene, k, size=None):
    """Draw gaze targets (x, y) from the mixture, rejecting off-screen draws."""
    weights, means, sigmas = mixture_components(cfg, scene, k)
    n = 1 if size is None else size
    out = np.empty((n, 2))
    filled = 0
    while filled < n:
        m = n - filled
        comp = rng.choice(len(weights), size=m, p=weights)
        pts = means[comp] + sigmas[comp, None] * rng.standard_normal((m, 2))
        ok = (pts[:, 0] >= 0) & (pts[:, 0] < cfg.width) & (pts[:, 1] >= 0) & (pts[:, 1] < cfg.height)
        pts = pts[ok]
        out[filled:filled + len(pts)] = pts
        filled += len(pts)
    return out[0] if size is None else out


def _angle_deg(geometry, a, b):
    ua = np.array(geometry.to_unit_vectors(a[0], a[1]))
    ub = np.array(geometry.to_unit_vectors(b[0], b[1]))
    return math.degrees(math.atan2(np.linalg.norm(np.cross(ua, ub)), float(np.dot(ua, ub))))


def simulate_gaze(plan, cfg, seed):
    """Gaze samples for every viewer and both eyes plus the planted schedule.

    Returns ``(samples, schedule)`` where ``schedule[(viewer, eye)]`` is the
    list of planted fixations as ``(t_start, t_end, x, y)``.
    """
    geom = cfg.geometry
    ppd = geom.pixels_per_degree()
    dt = 1.0 / cfg.gaze_rate
    n_samples = int(math.floor(plan.n_frames / cfg.fps * cfg.gaze_rate))
    samples, schedule = [], {}
    for v in range(cfg.viewers_per_video):
        rng = _video_rng(seed, plan.index, 100 + v)
        viewer = f"p{v:02d}"
        offset = rng.normal(0.0, cfg.viewer_offset_deg * ppd, size=2)
        targets = []  # (first_sample, last_sample, target)
        i = 0
        while i < n_samples:
            dur = int(round(rng.uniform(*cfg.fixation_ms) / 1000.0 * cfg.gaze_rate))
            frame = min(plan.n_frames - 1, int(math.floor(i * dt * cfg.fps)))
            scene = plan.scene_at(frame)
            target = None
            for _ in range(30):
                cand = sample_mixture(rng, cfg, scene, frame - scene.start)
                if not targets or _angle_deg(geom, cand, targets[-1][2]) >= cfg.min_saccade_deg:
                    target = cand
                    break
            last = min(n_samples - 1, i + dur - 1)
            if target is None:
                a, _, prev = targets[-1]
                targets[-1] = (a, last, prev)
            else:
                targets.append((i, last, target))
            i = last + 1
        jit = cfg.jitter_deg * ppd
        for eye, sign in (("left", -1.0), ("right", 1.0)):
            eye_shift = offset + np.array([sign * cfg.eye_offset_deg * ppd / 2.0, 0.0])
            planted = []
            for a, b, target in targets:
                base = target + eye_shift
                noise = rng.uniform(-jit, jit, size=(b - a + 1, 2))
                for s in range(a, b + 1):
                    x, y = base + noise[s - a]
                    samples.append(GazeSample(round(s * dt, 6), float(x), float(y), viewer, eye))
                planted.append((a * dt, b * dt, float(base[0]), float(base[1])))
            schedule[(viewer, eye)] = planted
    return samples, schedule


def _write_video(plan, cfg, seed, out_dir, dims, profile):
    vid = plan.video_id
    vdir = os.path.join(out_dir, "videos", vid)
    os.makedirs(vdir, exist_ok=True)
    meta = VideoAdMeta(vid, cfg.fps, cfg.width, cfg.height, plan.n_frames, plan.n_frames / cfg.fps, cfg.audio_rate)
    files = {}

    def path(kind, name):
        files[kind] = os.path.join("videos", vid, name)
        return os.path.join(vdir, name)

    frames = render_frames(plan, cfg)
    write_container(path("frames", "frames.vsal"), frames, "rgb", dtype="f16")
    audio = render_audio(plan, cfg, seed)
    write_wav(path("audio", "audio.wav"), audio, cfg.audio_rate)
    samples, schedule = simulate_gaze(plan, cfg, seed)
    write_gaze_csv(path("gaze", "gaze.csv"), samples)
    geom = cfg.geometry
    records = classify_fixations_ivt(samples, geom, meta)
    write_fixations_csv(path("fixations", "fixations.csv"), records)
    sigma_src = cfg.gt_sigma_deg * default_sigma_px(geom, meta)
    write_container(path("gt", "gt.vsal"), video_gt_maps(records, meta, dims, sigma_src), "probability")
    write_container(path("true_field", "true_field.vsal"), true_fields(plan, cfg, dims), "probability")

    stored = frames.astype(np.float16).astype(np.float32)
    scenes = detect_scenes(np.transpose(stored, (0, 2, 3, 1)))
    dump_json(path("scenes", "scenes.json"), [{"scene_id": k, "start_frame": a, "end_frame": b}
                                              for k, (a, b) in enumerate(scenes)])
    dump_json(path("truth", "truth.json"), {
        "video_id": vid,
        "scenes": [{"scene_id": s.scene_id, "start_frame": s.start, "end_frame": s.end,
                    "cluttered": s.cluttered, "n_blobs": len(s.blobs)} for s in plan.scenes],
        "planted_fixations": {f"{k[0]}/{k[1]}": len(v) for k, v in sorted(schedule.items())},
        "gt_sigma_src_px": sigma_src,
    })

    from ..captions import StubClient, caption_video, save_captions
    from .clips import build_scene_clips
    clips = build_scene_clips(stored, audio, cfg.audio_rate, meta, scenes, profile)
    captions = caption_video(vid, clips, StubClient())
    save_captions(path("captions", "captions.json"), captions)
    return VideoEntry(meta, files)


def synth_corpus(cfg, seed, out_dir, profile="desk"):
    """Render, simulate and ingest a full corpus under ``out_dir``.

    Writes per-video files plus ``manifest.json``; identical ``(cfg, seed)``
    produce byte-identical output.
    """
    dims = profile_dims(profile)
    os.makedirs(out_dir, exist_ok=True)
    entries = [_write_video(plan, cfg, seed, out_dir, dims, profile) for plan in plan_corpus(cfg, seed)]
    manifest = CorpusManifest(videos=entries, seed=seed, profile=profile, root=os.path.abspath(out_dir))
    if len(entries) >= 2:
        manifest = split_corpus(manifest, cfg.test_fraction, seed)
    else:
        manifest.split = {"train": manifest.video_ids, "test": []}
    dump_json(os.path.join(out_dir, "synth_config.json"), cfg.to_dict())
    save_manifest(manifest, os.path.join(out_dir, "manifest.json"))
    return manifest
