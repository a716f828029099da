"""Corpus ingestion, synthesis and ground-truth construction."""

from .gaze import (ScreenGeometry, build_gt_map, classify_fixations_ivt, default_sigma_px, detect_fixations,
                   normalize_to_prob, video_gt_maps)
from .preprocess import align_audio, preprocess_frames
from .scenes import detect_scenes
from .split import split_corpus
from .synth import SynthConfig, synth_corpus
from .types import (CorpusManifest, FixationRecord, GazeSample, SaliencyMap, SceneClip, VideoAdMeta,
                    VideoEntry)

__all__ = [
    "CorpusManifest", "FixationRecord", "GazeSample", "SaliencyMap", "SceneClip", "ScreenGeometry",
    "SynthConfig", "VideoAdMeta", "VideoEntry", "align_audio", "build_gt_map", "classify_fixations_ivt",
    "default_sigma_px", "detect_fixations", "detect_scenes", "normalize_to_prob", "preprocess_frames",
    "split_corpus", "synth_corpus", "video_gt_maps",
]
