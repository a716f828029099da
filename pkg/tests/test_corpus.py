import json
import math
import os

import numpy as np
import pytest

from viasnet.corpus import (GazeSample, SaliencyMap, ScreenGeometry, SynthConfig, VideoAdMeta, align_audio,
                            build_gt_map, classify_fixations_ivt, detect_scenes, normalize_to_prob,
                            preprocess_frames, synth_corpus)
from viasnet.corpus.io import (load_manifest, read_container, read_container_header, read_fixations_csv, read_wav,
                               resolve, write_container, write_wav)
from viasnet.corpus.split import split_corpus, split_counts
from viasnet.corpus.synth import plan_corpus, sample_mixture, true_fields
from viasnet.corpus.types import CorpusManifest, VideoEntry
from viasnet.errors import AlignmentError, ConfigurationError, IngestError, InvalidInputError
from viasnet.profiles import FRAME_MEAN, FRAME_STD

GEOM = ScreenGeometry(60.0, 53.1, 29.9, 1920, 1080)


def meta(n_frames=48, fps=24.0, width=1920, height=1080, rate=16000, vid="v"):
    return VideoAdMeta(vid, fps, width, height, n_frames, n_frames / fps, rate)


# -- containers and files ------------------------------------------------------

@pytest.mark.parametrize("dtype", ["f32", "f16"])
def test_container_round_trip(tmp_path, rng, dtype):
    data = rng.random((5, 7, 9)).astype(np.float32)
    path = str(tmp_path / "m.vsal")
    write_container(path, data, "probability", dtype=dtype)
    back, state = read_container(path)
    assert state == "probability"
    assert read_container_header(path)[:3] == (5, 7, 9)
    tol = 1e-3 if dtype == "f16" else 0
    np.testing.assert_allclose(back, data, atol=tol)


def test_container_header_layout(tmp_path):
    path = str(tmp_path / "m.vsal")
    write_container(path, np.zeros((2, 3, 4), np.float32), "raw")
    raw = open(path, "rb").read()
    assert raw[:5] == b"VSAL1"
    assert raw[5:9] == (2).to_bytes(4, "little")
    assert raw[9:11] == (3).to_bytes(2, "little") and raw[11:13] == (4).to_bytes(2, "little")
    assert raw[13] == 0 and raw[14] == 0
    assert len(raw) == 15 + 2 * 3 * 4 * 4


def test_container_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.vsal"
    path.write_bytes(b"NOPE!" + bytes(10))
    with pytest.raises(IngestError):
        read_container(str(path))


def test_wav_round_trip(tmp_path):
    t = np.arange(800) / 8000
    audio = 0.5 * np.sin(2 * np.pi * 440 * t)
    write_wav(str(tmp_path / "a.wav"), audio, 8000)
    back, rate = read_wav(str(tmp_path / "a.wav"))
    assert rate == 8000
    np.testing.assert_allclose(back, audio, atol=1 / 32767)


# -- scenes --------------------------------------------------------------------

def planted_video(cuts=(40, 80), n=120, h=45, w=80, seed=0):
    rng = np.random.default_rng(seed)
    colors = [(200, 40, 40), (40, 180, 60), (30, 60, 200), (220, 220, 40)]
    frames = np.empty((n, h, w, 3), np.uint8)
    bounds = [0, *cuts, n]
    for s in range(len(bounds) - 1):
        for f in range(bounds[s], bounds[s + 1]):
            img = np.empty((h, w, 3), np.uint8)
            img[:] = colors[s % len(colors)]
            x = (f * 2) % (w - 10)
            img[10:20, x:x + 10] = 255
            frames[f] = np.clip(img.astype(int) + rng.integers(-3, 4, img.shape), 0, 255)
    return frames


def test_detect_scenes_planted_cuts():
    assert detect_scenes(planted_video()) == [(0, 39), (40, 79), (80, 119)]


def test_detect_scenes_uniform_video():
    frames = np.full((30, 20, 20, 3), 128, np.uint8)
    assert detect_scenes(frames) == [(0, 29)]


def test_detect_scenes_empty():
    with pytest.raises(InvalidInputError):
        detect_scenes(np.zeros((0, 10, 10, 3), np.uint8))


def test_detect_scenes_min_length_suppresses_flash():
    frames = planted_video(cuts=(40, 43), n=80)
    scenes = detect_scenes(frames)
    assert all(b - a + 1 >= 6 for a, b in scenes)
    assert [f for a, b in scenes for f in range(a, b + 1)] == list(range(80))


# -- preprocessing -------------------------------------------------------------

def test_preprocess_paper_shape():
    frames = np.zeros((2, 1080, 1920, 3), np.uint8)
    assert preprocess_frames(frames, "paper").shape == (2, 3, 224, 384)


def test_preprocess_desk_shape_and_gray_value():
    out = preprocess_frames(np.full((3, 90, 160, 3), 0.5, np.float32), "desk")
    assert out.shape == (3, 3, 56, 96)
    for c in range(3):
        np.testing.assert_allclose(out[:, c], (0.5 - FRAME_MEAN[c]) / FRAME_STD[c], atol=1e-6)


def test_preprocess_corrupt_frame_named():
    frames = [np.zeros((90, 160, 3), np.uint8), np.zeros((90, 160), np.uint8)]
    with pytest.raises(IngestError) as err:
        preprocess_frames(frames, "desk")
    assert err.value.frame_index == 1


def test_align_audio_peak_normalizes():
    m = meta(48, rate=16000)
    t = np.arange(32000) / 16000
    out = align_audio(0.3 * np.sin(2 * np.pi * 5 * t), 16000, m, (0, 47))
    assert out.shape == (32000,)
    assert np.max(np.abs(out)) == pytest.approx(1.0)
    np.testing.assert_allclose(out, np.sin(2 * np.pi * 5 * t) / np.max(np.abs(np.sin(2 * np.pi * 5 * t))),
                               atol=1e-9)


def test_align_audio_silent_and_resampled():
    m = meta(48, rate=16000)
    out = align_audio(np.zeros(2 * 44100), 44100, m, (0, 47), 16000)
    assert out.shape == (32000,) and not np.any(out)


def test_align_audio_too_short():
    with pytest.raises(AlignmentError):
        align_audio(np.zeros(1000), 16000, meta(48), (0, 47))


# -- gaze / IVT ----------------------------------------------------------------

def trace(points, viewer="p0", eye="left", rate=100.0):
    return [GazeSample(i / rate, x, y, viewer, eye) for i, (x, y) in enumerate(points)]


def test_ivt_stationary_gaze_one_fixation():
    recs = classify_fixations_ivt(trace([(960.0, 540.0)] * 30), GEOM, meta())
    frames = sorted(r.frame_idx for r in recs)
    assert frames == list(range(0, 7))  # 0.00-0.29 s covers frames 0..6 at 24 fps
    assert all((r.x, r.y) == (960.0, 540.0) for r in recs)


def test_ivt_jump_splits_fixations():
    ppd = GEOM.pixels_per_degree()
    pts = [(960.0, 540.0)] * 20 + [(960.0 + 10 * ppd, 540.0)] * 20
    recs = classify_fixations_ivt(trace(pts), GEOM, meta())
    xs = sorted({round(r.x, 6) for r in recs})
    assert len(xs) == 2


def test_ivt_requires_geometry():
    with pytest.raises(ConfigurationError):
        classify_fixations_ivt(trace([(1.0, 1.0)] * 3), None, meta())


# -- ground truth maps ---------------------------------------------------------

def test_gt_single_peak():
    m = build_gt_map([(12.5, 7.5)], (20, 30), 2.0)
    assert np.unravel_index(np.argmax(m.values), m.values.shape) == (7, 12)


def test_gt_linearity():
    a = build_gt_map([(3.2, 4.1)], (10, 10), 1.5).values
    b = build_gt_map([(7.0, 2.2), (1.0, 9.0)], (10, 10), 1.5).values
    both = build_gt_map([(3.2, 4.1), (7.0, 2.2), (1.0, 9.0)], (10, 10), 1.5).values
    np.testing.assert_allclose(both, a + b, rtol=1e-12)
    np.testing.assert_allclose(build_gt_map([(5, 5), (5, 5)], (10, 10), 1).values,
                               2 * build_gt_map([(5, 5)], (10, 10), 1).values)


def test_gt_center_ratio():
    m = build_gt_map([(4.5, 4.5)], (9, 9), 1.0).values
    assert m[4, 4] / m[4, 5] == pytest.approx(math.exp(0.5), rel=1e-12)


def test_gt_zero_fixations_uniform():
    p = normalize_to_prob(build_gt_map([], (4, 5), 1.0))
    np.testing.assert_allclose(p.values, 1 / 20)


def test_normalize_to_prob_arithmetic():
    p = normalize_to_prob(SaliencyMap(np.array([[0.0, 1.0], [1.0, 2.0]])))
    assert p.state == "probability"
    np.testing.assert_allclose(p.values, [[0, 0.25], [0.25, 0.5]])
    d = normalize_to_prob(SaliencyMap(np.array([[0.0, 1.0], [0.0, 0.0]])))
    np.testing.assert_array_equal(d.values, [[0, 1], [0, 0]])


def test_gt_matches_generative_field():
    cfg = SynthConfig.desk(n_videos=1)
    plan = plan_corpus(cfg, 5)[0]
    scene = plan.scenes[0]
    dims = (56, 96)
    pts = sample_mixture(np.random.default_rng(0), cfg, scene, 0, size=5000)
    pts = pts * np.array([dims[1] / cfg.width, dims[0] / cfg.height])
    gt = normalize_to_prob(build_gt_map(pts, dims, 1.5)).values
    field = true_fields(plan, cfg, dims)[0]
    assert np.corrcoef(gt.ravel(), field.ravel())[0, 1] > 0.8


# -- split ---------------------------------------------------------------------

@pytest.mark.parametrize("n,f,expected", [(10, 0.2, (8, 2)), (151, 0.2, (121, 30)), (3, 0.1, (2, 1))])
def test_split_counts(n, f, expected):
    assert split_counts(n, f) == expected


@pytest.mark.parametrize("f", [0.0, 1.0, -0.1, 1.5])
def test_split_fraction_bounds(f):
    with pytest.raises(ConfigurationError):
        split_counts(10, f)


def test_split_video_level_deterministic():
    videos = [VideoEntry(meta(vid=f"v{i}")) for i in range(10)]
    a = split_corpus(CorpusManifest(list(videos)), 0.2, 3).split
    b = split_corpus(CorpusManifest(list(videos)), 0.2, 3).split
    assert a == b
    assert len(a["test"]) == 2 and sorted(a["train"] + a["test"]) == sorted(f"v{i}" for i in range(10))


# -- synthetic corpus ----------------------------------------------------------

def _tree_bytes(root):
    out = {}
    for d, _, files in os.walk(root):
        for f in files:
            p = os.path.join(d, f)
            out[os.path.relpath(p, root)] = open(p, "rb").read()
    return out


def test_synth_deterministic(tmp_path):
    cfg = SynthConfig.desk(n_videos=2, scenes_per_video=2.0, frames_per_scene=20.0, viewers_per_video=3)
    synth_corpus(cfg, 7, str(tmp_path / "a"))
    synth_corpus(cfg, 7, str(tmp_path / "b"))
    assert _tree_bytes(tmp_path / "a") == _tree_bytes(tmp_path / "b")


def test_synth_defaults():
    assert SynthConfig().viewers_per_video == 20
    assert SynthConfig().scenes_per_video == pytest.approx(15.6)
    assert SynthConfig().frames_per_scene == pytest.approx(51.5)


def test_tiny_corpus_contract(tiny_corpus):
    m = tiny_corpus
    assert sorted(m.split["train"] + m.split["test"]) == m.video_ids
    for vid in m.video_ids:
        entry = m.video(vid)
        gt, state = read_container(resolve(m, vid, "gt"))
        assert state == "probability" and gt.shape == (entry.meta.n_frames, 56, 96)
        np.testing.assert_allclose(gt.sum(axis=(1, 2)), 1.0, atol=1e-5)
        frames, fstate = read_container(resolve(m, vid, "frames"))
        assert fstate == "rgb" and frames.shape[1] == 3
        for r in read_fixations_csv(resolve(m, vid, "fixations")):
            assert 0 <= r.x < entry.meta.width and 0 <= r.y < entry.meta.height
            assert 0 <= r.frame_idx < entry.meta.n_frames
        scenes = json.load(open(resolve(m, vid, "scenes")))
        truth = json.load(open(resolve(m, vid, "truth")))
        assert [(s["start_frame"], s["end_frame"]) for s in scenes] == \
               [(s["start_frame"], s["end_frame"]) for s in truth["scenes"]]


def test_manifest_missing_file(tiny_corpus, tmp_path):
    doc = json.load(open(os.path.join(tiny_corpus.root, "manifest.json")))
    doc["videos"][0]["files"]["gt"] = "nowhere.vsal"
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(IngestError):
        load_manifest(str(path))
