"""Pipeline configuration: defaults, JSON file loading, env overlays."""

from __future__ import annotations

import json
import os
import shlex
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class DetectorConfig:
    mode: str = "content"            # "content" | "histogram"
    pixel_threshold: float = 30.0    # per-pixel intensity delta t, [0, 255]
    percent_threshold: float = 30.0  # percentage T, [0, 100]
    histogram_threshold: float | None = None  # None = one count per pixel (M*N)


@dataclass
class ClusteringConfig:
    k: int = 90
    seed: int = 0
    init: str = "random"  # "random" | "kmeans++"
    max_iter: int = 300


@dataclass
class AssemblyConfig:
    c: int = 5
    end_offset: float = 10.0
    fade_duration: float = 1.0
    seed: int = 0


@dataclass
class GenreConfig:
    cache_path: str | None = None  # default: <index_dir>/genre-cache.json
    fingerprint_endpoint: str | None = None
    tags_endpoint: str | None = None
    fingerprint_key: str | None = None  # else env MVGEN_FINGERPRINT_KEY
    tags_key: str | None = None         # else env MVGEN_TAGS_KEY


@dataclass
class PipelineConfig:
    index_dir: str = "index"
    codec_tool_path: str = "ffmpeg"
    output_fps: int = 25
    workers: int = 0  # 0 = logical CPU count
    model_path: str | None = None  # None = identity projection model
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    assembly: AssemblyConfig = field(default_factory=AssemblyConfig)
    genre: GenreConfig = field(default_factory=GenreConfig)

    @property
    def codec_command(self) -> list[str]:
        """Codec tool invocation prefix, shell-split so interpreters work
        (e.g. "python -m mvgen.rawcodec")."""
        return shlex.split(self.codec_tool_path)

    @property
    def genre_cache_path(self) -> Path:
        if self.genre.cache_path:
            return Path(self.genre.cache_path)
        return Path(self.index_dir) / "genre-cache.json"

    def fingerprint_key(self) -> str | None:
        return self.genre.fingerprint_key or os.environ.get("MVGEN_FINGERPRINT_KEY")

    def tags_key(self) -> str | None:
        return self.genre.tags_key or os.environ.get("MVGEN_TAGS_KEY")


def _apply(obj, data: dict) -> None:
    for key, value in data.items():
        if not hasattr(obj, key):
            raise ValueError(f"unknown config key: {key!r}")
        setattr(obj, key, value)


def load_config(path: str | Path | None) -> PipelineConfig:
    """Build a PipelineConfig, overlaying a JSON file when given.

    The file mirrors the dataclass layout: top-level scalars plus optional
    "detector", "clustering", "assembly" and "genre" sections.
    """
    cfg = PipelineConfig()
    if path is None:
        return cfg
    data = json.loads(Path(path).read_text())
    for section, obj in (
        ("detector", cfg.detector),
        ("clustering", cfg.clustering),
        ("assembly", cfg.assembly),
        ("genre", cfg.genre),
    ):
        if section in data:
            _apply(obj, data.pop(section))
    _apply(cfg, data)
    return cfg
