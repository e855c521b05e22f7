"""Genre resolution cascade, tag voting, and cache behavior, all offline."""

import json

import numpy as np
import pytest

from mvgen import genre
from mvgen.errors import NotRecognized, ServiceUnavailable
from mvgen.media import PcmAudio


def _audio(seed: int = 0, seconds: float = 120.0,
           rate: int = 22050) -> PcmAudio:
    rng = np.random.default_rng(seed)
    return PcmAudio(rate, rng.uniform(-0.5, 0.5, int(seconds * rate)))


def _clients_for(audio, tags, title="song", artist="band"):
    fp = genre.MockFingerprintClient(
        {genre.excerpt_hash(audio): genre.TrackIdentity(title, artist)})
    tg = genre.MockTagsClient({(title.lower(), artist.lower()): tags})
    return genre.GenreClients(fp, tg)


# ---------------------------------------------------------------------------
# tag voting


@pytest.mark.parametrize("tags,category", [
    (["rock", "metal"], genre.ROCK),
    (["pop"], genre.POP),
    (["indie"], genre.POP),
    (["house"], genre.ELECTRONIC),
    (["hip hop", "rap", "seen live"], genre.HIPHOP),
    (["edm", "techno", "rap"], genre.ELECTRONIC),
    (["shoegaze", "nonsense tags only"], genre.UNKNOWN),
    ([], genre.UNKNOWN),
])
def test_tag_plurality(tags, category):
    assert genre.tags_to_category(tags).category == category


def test_tag_tie_breaks_by_listing_order():
    # one vote each: the category listed first wins
    label = genre.tags_to_category(["rock", "pop"])
    first_with_vote = next(c for c in genre.CATEGORIES
                           if c in (genre.POP, genre.ROCK))
    assert label.category == first_with_vote


def test_tag_matching_normalizes_case_and_space():
    assert genre.tags_to_category(["  RoCk  "]).category == genre.ROCK


def test_tag_table_breadth():
    for cat in genre.CATEGORIES:
        if cat == genre.UNKNOWN:
            continue
        assert len(genre.TAG_TABLE[cat]) >= 13
    assert set(genre.CLI_GENRES.values()) == set(genre.CATEGORIES) - {
        genre.UNKNOWN}


# ---------------------------------------------------------------------------
# excerpting and fingerprinting


def test_excerpt_is_thirty_seconds_from_quarter_position():
    audio = _audio(seconds=120.0)
    ex = genre.excerpt(audio)
    assert len(ex.samples) == 30 * audio.sample_rate
    start = int(0.25 * len(audio.samples))
    assert np.array_equal(ex.samples, audio.samples[start:start + len(ex.samples)])


def test_excerpt_short_track_truncates():
    audio = _audio(seconds=20.0)
    ex = genre.excerpt(audio)
    assert len(ex.samples) == len(audio.samples) - int(0.25 * len(audio.samples))


def test_fingerprint_routes_excerpt_to_client():
    audio = _audio(1)
    client = genre.MockFingerprintClient(
        {genre.excerpt_hash(audio): genre.TrackIdentity("t", "a", 0.9)})
    identity = genre.fingerprint(audio, client)
    assert (identity.title, identity.artist) == ("t", "a")
    assert client.calls == 1


def test_fingerprint_unknown_audio():
    client = genre.MockFingerprintClient({})
    with pytest.raises(NotRecognized):
        genre.fingerprint(_audio(2), client)


def test_fingerprint_service_down():
    client = genre.MockFingerprintClient(available=False)
    with pytest.raises(ServiceUnavailable):
        genre.fingerprint(_audio(3), client)


# ---------------------------------------------------------------------------
# the resolve cascade


def test_override_wins_without_any_calls(tmp_path):
    audio = _audio(4)
    clients = _clients_for(audio, ["rock"])
    label = genre.resolve_genre(audio, clients,
                                manual_override=genre.ELECTRONIC,
                                cache=str(tmp_path / "cache.json"))
    assert label.category == genre.ELECTRONIC
    assert label.source == "manual"
    assert clients.fingerprint.calls == 0
    assert clients.tags.calls == 0


def test_cache_short_circuits_second_resolution(tmp_path):
    audio = _audio(5)
    clients = _clients_for(audio, ["hip hop", "rap"])
    cache_path = str(tmp_path / "cache.json")

    first = genre.resolve_genre(audio, clients, cache=cache_path)
    assert first.category == genre.HIPHOP
    assert first.source == "tags"
    assert clients.fingerprint.calls == 1

    second = genre.resolve_genre(audio, clients, cache=cache_path)
    assert second.category == genre.HIPHOP
    assert second.source == "cache"
    assert clients.fingerprint.calls == 1
    assert clients.tags.calls == 1


def test_unknown_results_are_not_cached(tmp_path):
    audio = _audio(6)
    clients = _clients_for(audio, ["no matching tag"])
    cache_path = str(tmp_path / "cache.json")
    label = genre.resolve_genre(audio, clients, cache=cache_path)
    assert label.category == genre.UNKNOWN
    again = genre.resolve_genre(audio, clients, cache=cache_path)
    assert again.source == "tags"
    assert clients.fingerprint.calls == 2


def test_services_down_degrades_to_unknown(tmp_path):
    audio = _audio(7)
    down = genre.GenreClients(
        genre.MockFingerprintClient(available=False),
        genre.MockTagsClient(available=False))
    label = genre.resolve_genre(audio, down,
                                cache=str(tmp_path / "cache.json"))
    assert label.category == genre.UNKNOWN
    assert label.source == "fingerprint"


def test_no_clients_at_all_is_unknown():
    label = genre.resolve_genre(_audio(8))
    assert label.category == genre.UNKNOWN


def test_unrecognized_then_tags_stage_failure(tmp_path):
    audio = _audio(9)
    fp = genre.MockFingerprintClient(
        {genre.excerpt_hash(audio): genre.TrackIdentity("t", "a")})
    down_tags = genre.GenreClients(fp, genre.MockTagsClient(available=False))
    label = genre.resolve_genre(audio, down_tags,
                                cache=str(tmp_path / "cache.json"))
    assert label.category == genre.UNKNOWN
    assert label.source == "tags"


def test_cache_file_contents_and_atomic_write(tmp_path):
    audio = _audio(10)
    clients = _clients_for(audio, ["metal"], title="T", artist="A")
    cache_path = tmp_path / "sub" / "cache.json"
    genre.resolve_genre(audio, clients, cache=str(cache_path))
    doc = json.loads(cache_path.read_text())
    key = genre.audio_content_hash(audio)
    assert doc[key]["category"] == genre.ROCK
    assert doc[key]["title"] == "T"
    assert not list(cache_path.parent.glob("*.tmp"))


def test_content_hash_depends_on_rate_and_samples():
    a = _audio(11, seconds=2.0)
    b = PcmAudio(44100, a.samples)
    assert genre.audio_content_hash(a) != genre.audio_content_hash(b)
    c = PcmAudio(a.sample_rate, a.samples.copy())
    assert genre.audio_content_hash(a) == genre.audio_content_hash(c)
