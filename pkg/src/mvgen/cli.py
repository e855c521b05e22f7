"""Command-line entry point: index, cluster, analyze, generate.

stdout carries machine-readable results (JSON, or one boundary per line for
analyze); stderr carries stage progress.  Exit codes: 0 success, 2 empty or
unusable corpus/index, 3 input track length out of range, 4 not enough
footage (or an empty genre slice), 5 media/codec errors.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import time

from . import assembler, clustering, sceneindex
from .config import PipelineConfig, load_config
from .errors import (
    CodecToolMissing,
    CorruptIndex,
    DurationMismatch,
    EmptyCorpus,
    EmptySlice,
    InputLengthOutOfRange,
    InsufficientFootage,
    MissingSource,
    NoAudioStream,
    UndecodableMedia,
)
from .genre import CLI_GENRES, UNKNOWN, GenreCache, GenreClients, resolve_genre
from .media import decode_audio, render
from .shots import DetectorParams
from .structure.boundaries import detect_boundaries
from .structure.olda import OldaModel

EXIT_OK = 0
EXIT_EMPTY_CORPUS = 2
EXIT_LENGTH = 3
EXIT_FOOTAGE = 4
EXIT_MEDIA = 5

_MEDIA_ERRORS = (CodecToolMissing, UndecodableMedia, NoAudioStream,
                 MissingSource, DurationMismatch)


def _stage(pct: int, text: str) -> None:
    sys.stderr.write(f"[{pct:3d}%] {text}\n")
    sys.stderr.flush()


def _load_cfg(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if getattr(args, "index_dir", None):
        cfg.index_dir = args.index_dir
    return cfg


def _detector_params(cfg: PipelineConfig) -> DetectorParams:
    d = cfg.detector
    return DetectorParams(d.pixel_threshold, d.percent_threshold,
                          d.histogram_threshold)


def cmd_index_build(args) -> int:
    cfg = _load_cfg(args)
    try:
        index = sceneindex.build_index(
            args.corpus_dir, _detector_params(cfg), cfg,
            mode=cfg.detector.mode, clients=GenreClients.from_config(cfg),
            progress=lambda line: _stage(50, line))
    except EmptyCorpus as exc:
        sys.stderr.write(f"empty corpus: {exc}\n")
        return EXIT_EMPTY_CORPUS
    _stage(100, "index written")
    print(json.dumps({"index_dir": cfg.index_dir,
                      "indexed": sorted(index.videos),
                      "rejected": index.rejected}, sort_keys=True))
    return EXIT_OK if index.videos else EXIT_EMPTY_CORPUS


def cmd_index_clean(args) -> int:
    cfg = _load_cfg(args)
    removed = False
    for name in ("manifest.json", "genre-cache.json"):
        path = os.path.join(cfg.index_dir, name)
        if os.path.exists(path):
            os.remove(path)
            removed = True
    for sub in ("videos", "media", "catalogs"):
        path = os.path.join(cfg.index_dir, sub)
        if os.path.isdir(path):
            shutil.rmtree(path)
            removed = True
    print(json.dumps({"index_dir": cfg.index_dir, "removed": removed}))
    return EXIT_OK


def _genre_category(name: str | None) -> str | None:
    if name in (None, "auto"):
        return None
    if name in ("whole", "unknown"):
        return UNKNOWN
    return CLI_GENRES[name]


def cmd_cluster(args) -> int:
    cfg = _load_cfg(args)
    k = args.k or cfg.clustering.k
    seed = cfg.clustering.seed if args.seed is None else args.seed
    try:
        index = sceneindex.load_index(cfg.index_dir)
    except CorruptIndex as exc:
        sys.stderr.write(f"unusable index: {exc}\n")
        return EXIT_EMPTY_CORPUS
    genre = _genre_category(args.genre) if args.genre else UNKNOWN
    _stage(10, f"clustering genre={genre or 'Whole'} K={k} seed={seed}")
    try:
        catalog = clustering.cluster_index(index, genre, k, seed, cfg,
                                           init=cfg.clustering.init)
    except EmptySlice as exc:
        sys.stderr.write(f"empty slice: {exc}\n")
        return EXIT_FOOTAGE
    path = clustering.catalog_path(cfg.index_dir, catalog.genre,
                                   catalog.K, catalog.seed)
    _stage(100, "catalog ready")
    print(json.dumps({"catalog": path, "genre": catalog.genre,
                      "K": catalog.K, "seed": catalog.seed,
                      "inertia": catalog.inertia}, sort_keys=True))
    return EXIT_OK


def _load_model(cfg: PipelineConfig, arg: str | None) -> OldaModel | None:
    path = arg if arg not in (None, "identity") else cfg.model_path
    if not path or path == "identity":
        return None
    with open(path) as f:
        return OldaModel.from_json(f.read())


def cmd_analyze(args) -> int:
    cfg = _load_cfg(args)
    try:
        audio = decode_audio(args.audio, config=cfg)
        bounds = detect_boundaries(audio, _load_model(cfg, args.model),
                                   repetitive=args.mode != "nonrepetitive")
    except InputLengthOutOfRange as exc:
        sys.stderr.write(f"track length out of range: {exc}\n")
        return EXIT_LENGTH
    except _MEDIA_ERRORS as exc:
        sys.stderr.write(f"media error: {exc}\n")
        return EXIT_MEDIA
    for t in bounds.times:
        print(f"{t:.6f}")
    return EXIT_OK


def cmd_generate(args) -> int:
    cfg = _load_cfg(args)
    seed = cfg.assembly.seed if args.seed is None else args.seed
    out_path = args.out or "output.rav"
    t0 = time.monotonic()
    try:
        _stage(5, "decoding audio")
        audio = decode_audio(args.audio, config=cfg)

        _stage(15, "finding music boundaries")
        bounds = detect_boundaries(audio, _load_model(cfg, args.model))

        _stage(35, "resolving genre")
        override = _genre_category(args.genre)
        if override == UNKNOWN:
            label_category = UNKNOWN
        else:
            label = resolve_genre(audio, GenreClients.from_config(cfg),
                                  manual_override=override,
                                  cache=GenreCache(cfg.genre_cache_path))
            label_category = label.category
        _stage(40, f"genre: {label_category}")

        index = sceneindex.load_index(cfg.index_dir)
        _stage(50, "clustering scenes")
        catalog = clustering.cluster_index(
            index, label_category, cfg.clustering.k, seed, cfg,
            init=cfg.clustering.init)

        _stage(65, "selecting clusters and assembling")
        acfg = cfg.assembly
        acfg.seed = seed
        chosen = assembler.select_clusters(catalog, index, audio.duration, acfg)
        edl = assembler.assemble(bounds, chosen, catalog, index, acfg)

        edl_path = out_path + ".edl.json"
        with open(edl_path, "w") as f:
            f.write(edl.to_json())
        planning = time.monotonic() - t0
        _stage(75, f"planning done in {planning:.2f} s; rendering")

        render(edl, args.audio, out_path,
               media_dir=os.path.join(cfg.index_dir, "media"), config=cfg)
    except InputLengthOutOfRange as exc:
        sys.stderr.write(f"track length out of range: {exc}\n")
        return EXIT_LENGTH
    except (InsufficientFootage, EmptySlice) as exc:
        sys.stderr.write(f"not enough footage: {exc}\n")
        return EXIT_FOOTAGE
    except CorruptIndex as exc:
        sys.stderr.write(f"unusable index: {exc}\n")
        return EXIT_EMPTY_CORPUS
    except _MEDIA_ERRORS as exc:
        sys.stderr.write(f"media error: {exc}\n")
        return EXIT_MEDIA
    _stage(100, "done")
    print(json.dumps({"video": out_path, "edl": edl_path,
                      "duration": edl.audio_duration,
                      "planning_seconds": round(planning, 3)}, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvgen",
        description="Generate music videos from a scene corpus.")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--index-dir", help="override index directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="corpus index operations")
    sub_index = p_index.add_subparsers(dest="index_command", required=True)
    p_build = sub_index.add_parser("build", help="index a corpus directory")
    p_build.add_argument("corpus_dir")
    p_build.set_defaults(func=cmd_index_build)
    p_clean = sub_index.add_parser("clean", help="remove index artifacts")
    p_clean.set_defaults(func=cmd_index_clean)

    p_cluster = sub.add_parser("cluster", help="build a cluster catalog")
    p_cluster.add_argument("--genre", choices=sorted(CLI_GENRES) + ["whole"],
                           default=None)
    p_cluster.add_argument("--k", type=int, default=None)
    p_cluster.add_argument("--seed", type=int, default=None)
    p_cluster.set_defaults(func=cmd_cluster)

    p_analyze = sub.add_parser("analyze", help="print music boundaries")
    p_analyze.add_argument("audio")
    p_analyze.add_argument("--model", default=None,
                           help="OLDA model JSON, or 'identity'")
    p_analyze.add_argument("--mode", choices=["repetitive", "nonrepetitive"],
                           default="repetitive")
    p_analyze.set_defaults(func=cmd_analyze)

    p_gen = sub.add_parser("generate", help="generate a music video")
    p_gen.add_argument("audio")
    p_gen.add_argument("--genre", choices=["auto"] + sorted(CLI_GENRES),
                       default="auto")
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.add_argument("--out", default=None)
    p_gen.add_argument("--model", default=None,
                       help="OLDA model JSON, or 'identity'")
    p_gen.set_defaults(func=cmd_generate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
