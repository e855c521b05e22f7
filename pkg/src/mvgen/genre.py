"""Genre resolution: manual override, content-hash cache, then web services.

A track resolves to one of four categories (or Unknown) through a fixed
cascade: explicit override, cache lookup keyed by a hash of the PCM content,
audio fingerprinting to (title, artist), and finally a tag lookup mapped
through a bundled tag table.  Service adapters are pluggable so tests run
fully offline against in-memory mocks.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np
import requests

from .errors import NotRecognized, ServiceUnavailable
from .media import PcmAudio

POP = "PopIndie"
ROCK = "RockMetalAlternative"
HIPHOP = "HipHopRapRnB"
ELECTRONIC = "ElectronicHouse"
UNKNOWN = "Unknown"

CATEGORIES = (POP, ROCK, HIPHOP, ELECTRONIC)  # listing order breaks ties

EXCERPT_SECONDS = 30.0
EXCERPT_POSITION = 0.25

# CLI spelling -> category; "auto" means no override
CLI_GENRES = {
    "pop": POP,
    "rock": ROCK,
    "hiphop": HIPHOP,
    "electronic": ELECTRONIC,
}

TAG_TABLE: dict[str, tuple[str, ...]] = {
    POP: ("pop", "indie", "indie pop", "synthpop", "synth-pop", "electropop",
          "dream pop", "power pop", "dance pop", "k-pop", "britpop",
          "singer-songwriter", "folk pop"),
    ROCK: ("rock", "metal", "alternative", "alternative rock", "hard rock",
           "punk", "punk rock", "heavy metal", "metalcore", "grunge",
           "indie rock", "classic rock", "progressive rock", "post-rock",
           "death metal"),
    HIPHOP: ("hip-hop", "hip hop", "rap", "trap", "r&b", "rnb", "soul",
             "gangsta rap", "east coast rap", "west coast rap", "drill",
             "grime", "neo-soul", "funk"),
    ELECTRONIC: ("electronic", "house", "edm", "techno", "trance", "dubstep",
                 "electro", "deep house", "drum and bass", "dnb", "ambient",
                 "electronica", "dance", "eurodance", "idm"),
}


@dataclass(frozen=True)
class GenreLabel:
    category: str
    source: str  # fingerprint | tags | manual | cache

    @property
    def is_known(self) -> bool:
        return self.category != UNKNOWN


@dataclass
class TrackIdentity:
    title: str
    artist: str
    confidence: float = 1.0


def pcm16_bytes(audio: PcmAudio) -> bytes:
    x = np.clip(np.round(audio.samples * 32768.0), -32768, 32767)
    return x.astype("<i2").tobytes()


def audio_content_hash(audio: PcmAudio) -> str:
    h = hashlib.sha256()
    h.update(pcm16_bytes(audio))
    h.update(str(audio.sample_rate).encode())
    return h.hexdigest()


def excerpt(audio: PcmAudio, seconds: float = EXCERPT_SECONDS,
            position: float = EXCERPT_POSITION) -> PcmAudio:
    start = int(position * len(audio.samples))
    length = int(seconds * audio.sample_rate)
    return PcmAudio(audio.sample_rate, audio.samples[start:start + length])


def excerpt_hash(audio: PcmAudio) -> str:
    """Key mock fingerprint fixtures by what would go over the wire."""
    return hashlib.sha256(pcm16_bytes(excerpt(audio))).hexdigest()


def tags_to_category(tags: list[str]) -> GenreLabel:
    """Plurality vote over the bundled table; listing order breaks ties."""
    normalized = [t.strip().lower() for t in tags]
    counts = {cat: sum(t in TAG_TABLE[cat] for t in normalized)
              for cat in CATEGORIES}
    best = max(CATEGORIES, key=lambda cat: counts[cat])
    if counts[best] == 0:
        return GenreLabel(UNKNOWN, "tags")
    return GenreLabel(best, "tags")


def fingerprint(audio: PcmAudio, client) -> TrackIdentity:
    """Identify a track from at most a 30 s excerpt at the 25% position."""
    return client.identify(excerpt(audio))


class MockFingerprintClient:
    """In-memory fingerprint service keyed by excerpt content hash."""

    def __init__(self, mapping: dict[str, TrackIdentity] | None = None,
                 available: bool = True):
        self.mapping = mapping or {}
        self.available = available
        self.calls = 0

    def identify(self, sample: PcmAudio) -> TrackIdentity:
        self.calls += 1
        if not self.available:
            raise ServiceUnavailable("mock fingerprint service down")
        key = hashlib.sha256(pcm16_bytes(sample)).hexdigest()
        if key not in self.mapping:
            raise NotRecognized("no fingerprint match")
        return self.mapping[key]


class MockTagsClient:
    """In-memory tag service keyed by lowercase (title, artist)."""

    def __init__(self, mapping: dict[tuple[str, str], list[str]] | None = None,
                 available: bool = True):
        self.mapping = mapping or {}
        self.available = available
        self.calls = 0

    def tags_for(self, title: str, artist: str) -> list[str]:
        self.calls += 1
        if not self.available:
            raise ServiceUnavailable("mock tag service down")
        return self.mapping.get((title.lower(), artist.lower()), [])


class HttpFingerprintClient:
    """POSTs a PCM excerpt to a fingerprint endpoint returning JSON."""

    def __init__(self, endpoint: str, api_key: str | None, timeout: float = 10.0):
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout = timeout

    def identify(self, sample: PcmAudio) -> TrackIdentity:
        try:
            resp = requests.post(
                self.endpoint,
                params={"key": self.api_key or "", "rate": sample.sample_rate},
                data=pcm16_bytes(sample),
                headers={"Content-Type": "application/octet-stream"},
                timeout=self.timeout)
        except requests.RequestException as exc:
            raise ServiceUnavailable(str(exc)) from exc
        if resp.status_code != 200:
            raise ServiceUnavailable(f"fingerprint HTTP {resp.status_code}")
        body = resp.json()
        if body.get("status") == "nomatch" or "title" not in body:
            raise NotRecognized("no fingerprint match")
        return TrackIdentity(body["title"], body.get("artist", ""),
                             float(body.get("confidence", 1.0)))


class HttpTagsClient:
    """GETs top tags for (title, artist) from a tag endpoint returning JSON."""

    def __init__(self, endpoint: str, api_key: str | None, timeout: float = 10.0):
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout = timeout

    def tags_for(self, title: str, artist: str) -> list[str]:
        try:
            resp = requests.get(
                self.endpoint,
                params={"key": self.api_key or "", "title": title,
                        "artist": artist},
                timeout=self.timeout)
        except requests.RequestException as exc:
            raise ServiceUnavailable(str(exc)) from exc
        if resp.status_code != 200:
            raise ServiceUnavailable(f"tags HTTP {resp.status_code}")
        return list(resp.json().get("tags", []))


@dataclass
class GenreClients:
    fingerprint: object | None = None
    tags: object | None = None

    @classmethod
    def from_config(cls, config) -> "GenreClients":
        g = config.genre
        fp = tag = None
        if g.fingerprint_endpoint:
            fp = HttpFingerprintClient(g.fingerprint_endpoint,
                                       config.fingerprint_key())
        if g.tags_endpoint:
            tag = HttpTagsClient(g.tags_endpoint, config.tags_key())
        return cls(fp, tag)


class GenreCache:
    """JSON file mapping audio content hash to a resolved identity."""

    def __init__(self, path: str | None):
        self.path = path
        self._data: dict | None = None

    def _load(self) -> dict:
        if self._data is None:
            self._data = {}
            if self.path and os.path.exists(self.path):
                with open(self.path) as f:
                    self._data = json.load(f)
        return self._data

    def get(self, content_hash: str) -> dict | None:
        return self._load().get(content_hash)

    def put(self, content_hash: str, entry: dict) -> None:
        data = self._load()
        data[content_hash] = entry
        if not self.path:
            return
        os.makedirs(os.path.dirname(self.path) or ".", exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(self.path) or ".",
                                   suffix=".tmp")
        with os.fdopen(fd, "w") as f:
            json.dump(data, f, indent=1, sort_keys=True)
        os.replace(tmp, self.path)


def resolve_genre(audio: PcmAudio, clients: GenreClients | None = None,
                  manual_override: str | None = None,
                  cache: GenreCache | str | None = None) -> GenreLabel:
    """Resolve one track's category through the override/cache/service cascade.

    Unknown is a value, never an error; only categorized results are cached
    so a transient service outage cannot poison later runs.
    """
    if manual_override:
        return GenreLabel(manual_override, "manual")

    if isinstance(cache, str) or cache is None:
        cache = GenreCache(cache)
    content_hash = audio_content_hash(audio)
    hit = cache.get(content_hash)
    if hit:
        return GenreLabel(hit["category"], "cache")

    clients = clients or GenreClients()
    if clients.fingerprint is None:
        return GenreLabel(UNKNOWN, "fingerprint")
    try:
        identity = fingerprint(audio, clients.fingerprint)
    except (NotRecognized, ServiceUnavailable):
        return GenreLabel(UNKNOWN, "fingerprint")

    if clients.tags is None:
        return GenreLabel(UNKNOWN, "tags")
    try:
        tags = clients.tags.tags_for(identity.title, identity.artist)
    except (NotRecognized, ServiceUnavailable):
        return GenreLabel(UNKNOWN, "tags")

    label = tags_to_category(tags)
    if label.is_known:
        cache.put(content_hash, {"category": label.category,
                                 "title": identity.title,
                                 "artist": identity.artist})
    return label
