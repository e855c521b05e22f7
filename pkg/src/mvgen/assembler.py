"""Plan the output video: pick clusters, order scenes, cut at boundaries.

The assembler is pure planning: given music boundaries, a cluster catalog
and the scene index it emits an EditDecisionList placing whole scenes end
to end, trimming the scene that straddles a boundary so the cut lands on
it, and switching to the next cluster (cyclically) at every boundary.  The
last stretch of the track is covered by a single closing scene plus a fade.
All output times live on the 1/25 s frame grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusterCatalog
from .config import AssemblyConfig
from .errors import InsufficientFootage
from .sceneindex import IndexedScene, SceneIndex
from .structure.boundaries import BoundarySet

FPS = 25
FRAME = 1.0 / FPS
SELECTION_DRAWS = 200


@dataclass
class EdlEntry:
    scene: str  # "<source_id>:<start_frame>"
    trim_in: float
    trim_out: float
    out_start: float
    cluster: int

    @property
    def length(self) -> float:
        return self.trim_out - self.trim_in


@dataclass
class EditDecisionList:
    audio_duration: float
    entries: list[EdlEntry] = field(default_factory=list)
    fade_out: dict | None = None

    def to_json(self) -> str:
        return json.dumps({
            "audio_duration": self.audio_duration,
            "entries": [{
                "scene": e.scene,
                "trim_in": e.trim_in,
                "trim_out": e.trim_out,
                "out_start": e.out_start,
                "cluster": e.cluster,
            } for e in self.entries],
            "fade_out": self.fade_out,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EditDecisionList":
        doc = json.loads(text)
        return cls(float(doc["audio_duration"]),
                   [EdlEntry(d["scene"], float(d["trim_in"]),
                             float(d["trim_out"]), float(d["out_start"]),
                             int(d["cluster"])) for d in doc["entries"]],
                   doc.get("fade_out"))


def _cluster_ids(catalog: ClusterCatalog) -> list[int]:
    return sorted(set(catalog.assignments.values()))


def _cluster_duration(catalog: ClusterCatalog, index: SceneIndex,
                      cluster_id: int) -> float:
    return sum(index.lookup(ref).duration for ref in catalog.members(cluster_id))


def select_clusters(catalog: ClusterCatalog, index: SceneIndex,
                    l_input: float, cfg: AssemblyConfig) -> list[int]:
    """Seeded C-subset draws until total footage covers the input length.

    After a bounded number of failed draws the last subset is topped up
    greedily with the largest remaining clusters.
    """
    ids = _cluster_ids(catalog)
    totals = {cid: _cluster_duration(catalog, index, cid) for cid in ids}
    if sum(totals.values()) <= l_input:
        raise InsufficientFootage(
            f"catalog holds {sum(totals.values()):.1f} s for a "
            f"{l_input:.1f} s track")

    c = min(cfg.c, len(ids))
    rng = np.random.default_rng(cfg.seed)
    subset: list[int] = []
    for _ in range(SELECTION_DRAWS):
        subset = [int(x) for x in rng.choice(ids, size=c, replace=False)]
        if sum(totals[cid] for cid in subset) > l_input:
            return subset
    for cid in sorted(set(ids) - set(subset), key=lambda x: -totals[x]):
        subset.append(cid)
        if sum(totals[s] for s in subset) > l_input:
            break
    return subset


def order_scenes(members: list[str], index: SceneIndex,
                 seed) -> list[IndexedScene]:
    """Group by source video, shuffle the groups, keep temporal order inside."""
    groups: dict[str, list[IndexedScene]] = {}
    for ref in members:
        sc = index.lookup(ref)
        groups.setdefault(sc.scene.source_id, []).append(sc)
    for scenes in groups.values():
        scenes.sort(key=lambda sc: sc.scene.start_frame)
    order = sorted(groups)
    rng = np.random.default_rng(seed)
    shuffled = [order[i] for i in rng.permutation(len(order))]
    return [sc for src in shuffled for sc in groups[src]]


def _quantize_frames(seconds: float) -> int:
    return int(round(seconds * FPS))


def _scene_grid_frames(scene: IndexedScene) -> int:
    # never promise more footage than the scene holds
    return int(np.floor(scene.duration * FPS + 1e-9))


class _Queues:
    """Per-cluster scene queues sharing one global used-set."""

    def __init__(self, clusters: list[int], catalog: ClusterCatalog,
                 index: SceneIndex, seed: int):
        self.clusters = clusters
        self.queues = {
            cid: order_scenes(catalog.members(cid), index, [seed, cid])
            for cid in clusters
        }
        self.used: set[str] = set()

    def _skim(self, cid: int) -> None:
        q = self.queues[cid]
        while q and q[0].ref in self.used:
            q.pop(0)

    def has_scenes(self, cid: int) -> bool:
        self._skim(cid)
        return bool(self.queues[cid])

    def pop(self, cid: int) -> IndexedScene:
        self._skim(cid)
        sc = self.queues[cid].pop(0)
        self.used.add(sc.ref)
        return sc

    def any_left(self) -> bool:
        return any(self.has_scenes(cid) for cid in self.clusters)

    def remaining(self) -> list[tuple[int, IndexedScene]]:
        out = []
        for cid in self.clusters:
            self._skim(cid)
            out.extend((cid, sc) for sc in self.queues[cid])
        return out

    def take(self, cid: int, ref: str) -> None:
        self.used.add(ref)


def _advance(cursor: int, clusters: list[int], queues: _Queues) -> int:
    for step in range(1, len(clusters) + 1):
        cand = (cursor + step) % len(clusters)
        if queues.has_scenes(clusters[cand]):
            return cand
    return cursor


def assemble(boundaries: BoundarySet, clusters: list[int],
             catalog: ClusterCatalog, index: SceneIndex,
             cfg: AssemblyConfig | None = None) -> EditDecisionList:
    """Build the edit decision list for one track.

    Cluster switches happen exactly at (frame-quantized) boundaries and when
    a cluster runs dry; both advance the same cyclic cursor.  No scene is
    ever used twice.  The tail after duration - end_offset is closed by the
    smallest unused scene that still covers it (or the longest available,
    with the gap before it filled normally), then the fade.
    """
    cfg = cfg or AssemblyConfig()
    duration = boundaries.duration
    total_frames = _quantize_frames(duration)
    fill_end = max(0, total_frames - _quantize_frames(cfg.end_offset))

    cuts = sorted({_quantize_frames(b) for b in boundaries.internal
                   if 0 < _quantize_frames(b) < fill_end})
    edges = [0] + cuts + [fill_end]

    queues = _Queues(clusters, catalog, index, cfg.seed)
    entries: list[EdlEntry] = []
    cursor = 0
    frame = 0

    def fill_to(target: int, cursor: int) -> int:
        nonlocal frame
        while frame < target:
            if not queues.has_scenes(clusters[cursor]):
                nxt = _advance(cursor, clusters, queues)
                if nxt == cursor and not queues.has_scenes(clusters[cursor]):
                    raise InsufficientFootage(
                        f"ran dry at {frame / FPS:.2f} s of {duration:.2f} s")
                cursor = nxt
            scene = queues.pop(clusters[cursor])
            take = min(_scene_grid_frames(scene), target - frame)
            if take <= 0:
                continue
            entries.append(EdlEntry(scene.ref, 0.0, take / FPS,
                                    frame / FPS, clusters[cursor]))
            frame += take
        return cursor

    for a, b in zip(edges, edges[1:]):
        cursor = fill_to(b, cursor)
        if b != fill_end:
            cursor = _advance(cursor, clusters, queues)

    tail = total_frames - fill_end
    if tail > 0:
        candidates = [(cid, sc) for cid, sc in queues.remaining()
                      if _scene_grid_frames(sc) >= tail]
        if candidates:
            cid, closing = min(
                candidates, key=lambda p: (_scene_grid_frames(p[1]), p[1].ref))
            queues.take(cid, closing.ref)
            entries.append(EdlEntry(closing.ref, 0.0, tail / FPS,
                                    fill_end / FPS, cid))
            frame = total_frames
        else:
            rest = queues.remaining()
            if not rest:
                raise InsufficientFootage("no scenes left for the tail")
            cid, closing = max(
                rest, key=lambda p: (_scene_grid_frames(p[1]), p[1].ref))
            queues.take(cid, closing.ref)
            close_frames = _scene_grid_frames(closing)
            gap_end = total_frames - close_frames
            cursor = fill_to(gap_end, cursor)
            entries.append(EdlEntry(closing.ref, 0.0, close_frames / FPS,
                                    gap_end / FPS, cid))
            frame = total_frames

    fade = {"start": duration - cfg.fade_duration,
            "duration": cfg.fade_duration}
    return EditDecisionList(duration, entries, fade)
