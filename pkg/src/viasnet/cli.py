"""``viasnet`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import diagnostics
from .config import ConfigErrors, validate_config
from .errors import ConfigurationError, ViasnetError

log = logging.getLogger("viasnet")

SUBCOMMANDS = ("synth", "ingest", "scenes", "gtmaps", "caption", "train", "eval", "ablate", "diagnose")
EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


class JsonFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps({"level": record.levelname, "logger": record.name, "message": record.getMessage()},
                          sort_keys=True)


def build_parser():
    parser = _Parser(prog="viasnet", description="Saliency prediction for video ads.")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}", parser_class=_Parser)
    sub.required = True
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run config")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key, e.g. train.steps=10")
        p.add_argument("--json-logs", action="store_true", help="one JSON object per log line")
        if name == "eval":
            p.add_argument("--checkpoint", help="defaults to paths.checkpoint, then the train stage output")
        if name == "diagnose":
            p.add_argument("--pred", help="directory of <video>.vsal predictions (default: eval output)")
    return parser


# -- manifests ---------------------------------------------------------------

def _out(cfg, *parts):
    return os.path.join(cfg.paths.output, *parts)


def working_manifest(cfg):
    """The derived manifest under the output root if a stage wrote one, else the corpus manifest."""
    from .corpus.io import load_manifest

    derived = _out(cfg, "manifest.json")
    return load_manifest(derived if os.path.exists(derived) else os.path.join(cfg.paths.corpus, "manifest.json"))


def _update_manifest(cfg, manifest, kind, produced):
    """Point ``kind`` at freshly written files and save the derived manifest."""
    from .corpus.io import save_manifest

    for entry in manifest.videos:
        entry.files = {k: os.path.abspath(os.path.join(manifest.root, p)) for k, p in entry.files.items()}
        if entry.meta.video_id in produced:
            entry.files[kind] = os.path.abspath(produced[entry.meta.video_id])
    manifest.root = None
    os.makedirs(cfg.paths.output, exist_ok=True)
    save_manifest(manifest, _out(cfg, "manifest.json"))


def _geometry(cfg, meta):
    from .corpus.gaze import ScreenGeometry

    c = cfg.corpus
    return ScreenGeometry(c.screen_distance_cm, c.screen_width_cm, c.screen_height_cm, meta.width, meta.height)


# -- stages ------------------------------------------------------------------

def run_synth(cfg, args):
    from .corpus.synth import synth_corpus

    m = synth_corpus(cfg.synth_config(), cfg.seed, cfg.paths.corpus, cfg.profile)
    log.info("synthesized %d videos under %s", len(m.videos), cfg.paths.corpus)


def run_ingest(cfg, args):
    from .corpus.gaze import classify_fixations_ivt
    from .corpus.io import read_gaze_csv, resolve, write_fixations_csv

    m = working_manifest(cfg)
    produced = {}
    for vid in m.video_ids:
        meta = m.video(vid).meta
        records = classify_fixations_ivt(read_gaze_csv(resolve(m, vid, "gaze")), _geometry(cfg, meta), meta,
                                         cfg.corpus.ivt_threshold_deg_s)
        path = _out(cfg, "ingest", vid, "fixations.csv")
        os.makedirs(os.path.dirname(path), exist_ok=True)
        write_fixations_csv(path, records)
        produced[vid] = path
        log.info("%s: %d fixation records", vid, len(records))
    _update_manifest(cfg, m, "fixations", produced)


def run_scenes(cfg, args):
    from .corpus.io import dump_json, read_container, resolve
    from .corpus.scenes import detect_scenes

    m = working_manifest(cfg)
    produced = {}
    for vid in m.video_ids:
        frames, _ = read_container(resolve(m, vid, "frames"))
        scenes = detect_scenes(np.transpose(frames, (0, 2, 3, 1)), cfg.corpus.scene_threshold,
                               min_scene_len=cfg.corpus.min_scene_len)
        path = _out(cfg, "scenes", vid, "scenes.json")
        os.makedirs(os.path.dirname(path), exist_ok=True)
        dump_json(path, [{"scene_id": k, "start_frame": a, "end_frame": b} for k, (a, b) in enumerate(scenes)])
        produced[vid] = path
        log.info("%s: %d scenes", vid, len(scenes))
    _update_manifest(cfg, m, "scenes", produced)


def run_gtmaps(cfg, args):
    from .corpus.gaze import default_sigma_px, video_gt_maps
    from .corpus.io import read_fixations_csv, resolve, write_container
    from .profiles import profile_dims

    m = working_manifest(cfg)
    dims = profile_dims(cfg.profile)
    produced = {}
    for vid in m.video_ids:
        meta = m.video(vid).meta
        sigma = cfg.corpus.gt_sigma_deg * default_sigma_px(_geometry(cfg, meta), meta)
        maps = video_gt_maps(read_fixations_csv(resolve(m, vid, "fixations")), meta, dims, sigma)
        path = _out(cfg, "gtmaps", vid, "gt.vsal")
        os.makedirs(os.path.dirname(path), exist_ok=True)
        write_container(path, maps, "probability")
        produced[vid] = path
    _update_manifest(cfg, m, "gt", produced)


def run_caption(cfg, args):
    from .captions import CaptionCache, HttpCaptionClient, StubClient, caption_video, save_captions
    from .corpus.clips import load_video_clips

    m = working_manifest(cfg)
    client = StubClient() if cfg.captions.provider == "stub" else HttpCaptionClient()
    cache = CaptionCache(_out(cfg, "caption_cache")) if cfg.captions.cache else None
    produced = {}
    for vid in m.video_ids:
        captions = caption_video(vid, load_video_clips(m, vid, with_captions=False), client, cache)
        path = _out(cfg, "captions", vid, "captions.json")
        os.makedirs(os.path.dirname(path), exist_ok=True)
        save_captions(path, captions)
        produced[vid] = path
    _update_manifest(cfg, m, "captions", produced)


def run_train(cfg, args):
    from .trainer import train

    _, report = train(working_manifest(cfg), cfg.model_config_obj(), cfg.train_config(), _out(cfg, "train"))
    log.info("train KL %.4f -> %.4f", report.initial_train_kl, report.final_train_kl)


def _checkpoint_path(cfg, args):
    return args.checkpoint or cfg.paths.checkpoint or _out(cfg, "train", "checkpoints", "final.pt")


def run_eval(cfg, args):
    from .metrics import write_aggregates_json, write_rows_csv
    from .network import load_checkpoint
    from .trainer import evaluate_model

    path = _checkpoint_path(cfg, args)
    if not os.path.exists(path):
        raise ConfigurationError(f"checkpoint not found: {path}")
    model, _ = load_checkpoint(path)
    m = working_manifest(cfg)
    ids = list(m.split.get("test") or m.video_ids)
    ev = evaluate_model(model, m, ids, cfg.metrics.n_splits, cfg.seed, _out(cfg, "eval", "pred"))
    write_rows_csv(_out(cfg, "eval", "metrics_rows.csv"), ev.rows)
    write_aggregates_json(_out(cfg, "eval", "metrics.json"), ev)
    for name, c in ev.corpus.items():
        log.info("%s: %s", name, " ".join(f"{k}={v:.4f}" for k, v in c.items()))


def run_ablate(cfg, args):
    from .trainer import run_ablation_suite

    table = run_ablation_suite(working_manifest(cfg), cfg.model_config_obj(), cfg.train_config(),
                               _out(cfg, "ablate"))
    for name, vals in table:
        log.info("%s: %s", name, " ".join(f"{k}={v:.4f}" for k, v in vals.items()))


def run_diagnose(cfg, args):
    from .corpus.clips import load_scenes
    from .corpus.gaze import fixations_by_frame
    from .corpus.io import read_container, read_fixations_csv, resolve

    pred_dir = args.pred or _out(cfg, "eval", "pred")
    if not os.path.isdir(pred_dir):
        raise ConfigurationError(f"prediction directory not found: {pred_dir}")
    m = working_manifest(cfg)
    vids = sorted(f[:-5] for f in os.listdir(pred_dir) if f.endswith(".vsal"))
    if not vids:
        raise ConfigurationError(f"no .vsal predictions in {pred_dir}")
    profiles, gt_profiles, dispersions = [], [], {}
    for vid in vids:
        scenes = load_scenes(resolve(m, vid, "scenes"))
        pred, _ = read_container(os.path.join(pred_dir, f"{vid}.vsal"))
        profiles.append(diagnostics.entropy_profile(vid, pred, scenes))
        gt, _ = read_container(resolve(m, vid, "gt"))
        gt_profiles.append(diagnostics.entropy_profile(vid, gt, scenes))
        meta = m.video(vid).meta
        per = fixations_by_frame(read_fixations_csv(resolve(m, vid, "fixations")), meta.n_frames)
        dispersions[vid] = [diagnostics.fixation_dispersion([(r.x, r.y) for r in recs], meta.width, meta.height)
                            for recs in per]
    report = diagnostics.engagement_report(profiles, gt_profiles, dispersions, cfg.diagnostics.bins)
    index = diagnostics.write_bundle(report, profiles, _out(cfg, "diagnostics"), cfg.diagnostics.plots)
    log.info("p10=%.4f p90=%.4f flagged scenes: %d", index["p10"], index["p90"], index["n_flagged_scenes"])


STAGES = {name: globals()[f"run_{name}"] for name in SUBCOMMANDS}


def _setup_logging(json_logs):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonFormatter() if json_logs else logging.Formatter("%(levelname)s %(message)s"))
    root = logging.getLogger("viasnet")
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO)
    root.propagate = False


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    _setup_logging(args.json_logs)
    overrides = list(args.set) + ([f"seed={args.seed}"] if args.seed is not None else [])
    try:
        cfg = validate_config(args.config, overrides)
    except ConfigErrors as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    try:
        STAGES[args.command](cfg, args)
    except ConfigurationError as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except (ViasnetError, OSError, ValueError, RuntimeError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
