"""On-disk formats: VSAL1 containers, mono WAV, fixation/gaze CSV, manifest JSON."""

from __future__ import annotations

import csv
import json
import os
import struct
import wave

import numpy as np

from ..errors import ContractError, IngestError
from .types import CorpusManifest, FixationRecord, GazeSample, VideoAdMeta, VideoEntry

MAGIC = b"VSAL1"
_HEADER = struct.Struct("<IHHBB")
HEADER_SIZE = len(MAGIC) + _HEADER.size

DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f2")}
DTYPE_CODES = {"f32": 0, "f16": 1}
# state 3 marks a 3-channel frame container; the header has no channel field
STATE_CODES = {"raw": 0, "minmax": 1, "probability": 2, "rgb": 3}
STATE_NAMES = {v: k for k, v in STATE_CODES.items()}

FIXATION_FIELDS = ["video_id", "frame_idx", "viewer_id", "eye", "x", "y"]
GAZE_FIELDS = ["t", "x", "y", "viewer_id", "eye"]


def write_container(path, data, state, dtype="f32"):
    """Write ``data`` of shape (N, H, W), or (N, 3, H, W) when ``state == "rgb"``."""
    data = np.asarray(data)
    channels = 3 if state == "rgb" else 1
    if state == "rgb":
        if data.ndim != 4 or data.shape[1] != 3:
            raise ContractError(f"rgb container expects (N, 3, H, W), got {data.shape}")
    elif data.ndim != 3:
        raise ContractError(f"map container expects (N, H, W), got {data.shape}")
    n, h, w = data.shape[0], data.shape[-2], data.shape[-1]
    code = DTYPE_CODES[dtype]
    body = np.ascontiguousarray(data, dtype=DTYPES[code])
    assert body.size == n * channels * h * w
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(n, h, w, code, STATE_CODES[state]))
        fh.write(body.tobytes())


def read_container_header(path):
    with open(path, "rb") as fh:
        head = fh.read(HEADER_SIZE)
    if len(head) < HEADER_SIZE or head[: len(MAGIC)] != MAGIC:
        raise IngestError(f"{path}: not a VSAL1 container")
    n, h, w, code, state = _HEADER.unpack(head[len(MAGIC):])
    if code not in DTYPES or state not in STATE_NAMES:
        raise IngestError(f"{path}: bad dtype/state code ({code}, {state})")
    return n, h, w, DTYPES[code], STATE_NAMES[state]


def read_container(path, mmap=False):
    """Return ``(array, state)``; float16 payloads are widened to float32 unless mmapped."""
    n, h, w, dtype, state = read_container_header(path)
    shape = (n, 3, h, w) if state == "rgb" else (n, h, w)
    expected = HEADER_SIZE + int(np.prod(shape)) * dtype.itemsize
    if os.path.getsize(path) != expected:
        raise IngestError(f"{path}: size {os.path.getsize(path)} != expected {expected}")
    if mmap:
        return np.memmap(path, dtype=dtype, mode="r", offset=HEADER_SIZE, shape=shape), state
    with open(path, "rb") as fh:
        fh.seek(HEADER_SIZE)
        arr = np.frombuffer(fh.read(), dtype=dtype).reshape(shape)
    return arr.astype(np.float32), state


def write_wav(path, audio, rate):
    pcm = np.round(np.clip(np.asarray(audio, dtype=np.float64), -1.0, 1.0) * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(rate))
        wf.writeframes(pcm.tobytes())


def read_wav(path):
    """Return ``(samples in [-1, 1] as float64, rate)``; multi-channel input is averaged."""
    with wave.open(str(path), "rb") as wf:
        if wf.getsampwidth() != 2:
            raise IngestError(f"{path}: only 16-bit PCM WAV is supported")
        n_ch = wf.getnchannels()
        rate = wf.getframerate()
        raw = np.frombuffer(wf.readframes(wf.getnframes()), dtype="<i2")
    audio = raw.reshape(-1, n_ch).astype(np.float64).mean(axis=1) / 32767.0
    return audio, rate


def write_fixations_csv(path, records):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(FIXATION_FIELDS)
        for r in records:
            wr.writerow([r.video_id, r.frame_idx, r.viewer_id, r.eye, repr(float(r.x)), repr(float(r.y))])


def read_fixations_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames != FIXATION_FIELDS:
            raise IngestError(f"{path}: header {rd.fieldnames} != {FIXATION_FIELDS}")
        return [
            FixationRecord(row["video_id"], int(row["frame_idx"]), row["viewer_id"], row["eye"],
                           float(row["x"]), float(row["y"]))
            for row in rd
        ]


def write_gaze_csv(path, samples):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(GAZE_FIELDS)
        for s in samples:
            wr.writerow([repr(float(s.t)), repr(float(s.x)), repr(float(s.y)), s.viewer_id, s.eye])


def read_gaze_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames != GAZE_FIELDS:
            raise IngestError(f"{path}: header {rd.fieldnames} != {GAZE_FIELDS}")
        return [GazeSample(float(r["t"]), float(r["x"]), float(r["y"]), r["viewer_id"], r["eye"]) for r in rd]


def dump_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_manifest(manifest, path):
    """Write the manifest; file paths are stored relative to the manifest's directory."""
    base = os.path.dirname(os.path.abspath(path))
    root = manifest.root or base
    videos = []
    for v in manifest.videos:
        files = {k: os.path.relpath(os.path.join(root, p), base) for k, p in sorted(v.files.items())}
        videos.append({"meta": v.meta.to_dict(), "files": files})
    dump_json(path, {
        "profile": manifest.profile,
        "seed": manifest.seed,
        "split": {k: sorted(manifest.split.get(k, [])) for k in ("train", "test")},
        "videos": videos,
    })


def load_manifest(path, check_files=True):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    videos = [VideoEntry(VideoAdMeta.from_dict(v["meta"]), dict(v["files"])) for v in doc["videos"]]
    manifest = CorpusManifest(videos=videos, split=doc.get("split", {"train": [], "test": []}),
                              seed=int(doc.get("seed", 0)), profile=doc.get("profile", "desk"), root=base)
    if check_files:
        validate_manifest(manifest)
    return manifest


def resolve(manifest, video_id, kind):
    return os.path.join(manifest.root, manifest.video(video_id).files[kind])


def validate_manifest(manifest):
    ids = manifest.video_ids
    if len(set(ids)) != len(ids):
        raise IngestError("duplicate video ids in manifest")
    train, test = set(manifest.split.get("train", [])), set(manifest.split.get("test", []))
    if (train or test) and (train & test or (train | test) != set(ids)):
        raise IngestError("manifest split is not a partition of the videos")
    for v in manifest.videos:
        for kind, rel in v.files.items():
            full = os.path.join(manifest.root, rel)
            if not os.path.exists(full):
                raise IngestError(f"{v.meta.video_id}: missing {kind} file {full}")
            if full.endswith(".vsal"):
                read_container_header(full)
