import numpy as np
import pytest

from emoshift import corpus, emotion
from emoshift.midi import MidiSong, NoteEvent

ACCEPTANCE_RESULTS = []


def record(criterion, passed, detail):
    ACCEPTANCE_RESULTS.append((criterion, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")


def random_song(rng, n_tracks=None, max_notes=40, tpq=None):
    """Random valid song with no overlapping notes on the same (channel, pitch)."""
    n_tracks = n_tracks if n_tracks is not None else int(rng.integers(1, 4))
    tpq = tpq or int(rng.choice([96, 192, 480, 960]))
    tracks = []
    for _ in range(n_tracks):
        busy = {}
        events = []
        for _ in range(int(rng.integers(0, max_notes + 1))):
            channel = int(rng.integers(16))
            pitch = int(rng.integers(128))
            onset = int(rng.integers(0, 20 * tpq))
            dur = int(rng.integers(1, 4 * tpq))
            spans = busy.setdefault((channel, pitch), [])
            if any(onset < e and s < onset + dur for s, e in spans):
                continue
            spans.append((onset, onset + dur))
            events.append(NoteEvent(onset, dur, pitch, int(rng.integers(1, 128)), channel))
        tracks.append(events)
    return MidiSong(tpq, int(rng.integers(1, 0xFFFFFF)), tracks)


def melody_from(pitches_beats, tpq=480, tempo=500000, velocity=96):
    events = []
    tick = 0
    for pitch, beats in pitches_beats:
        dur = int(beats * tpq)
        events.append(NoteEvent(tick, dur, pitch, velocity, 0))
        tick += dur
    return MidiSong(tpq, tempo, [events])


# B natural minor, tonic-heavy: B4 C#5 D5 E5 F#5 G5 A5
B_MINOR_LINE = [
    (71, 2), (73, 0.5), (74, 0.5), (76, 1), (78, 2), (74, 1), (71, 1),
    (79, 1), (78, 1), (76, 1), (74, 1), (73, 1), (71, 1), (66, 1), (71, 2),
    (74, 1), (78, 1), (83, 2), (81, 1), (79, 1), (78, 2), (74, 1), (73, 1), (71, 4),
]


@pytest.fixture
def b_minor_song():
    return melody_from(B_MINOR_LINE)


@pytest.fixture(scope="session")
def synthetic_corpus():
    return corpus.generate_synthetic_corpus(50, seed=0)


@pytest.fixture(scope="session")
def corpus_features(synthetic_corpus):
    return emotion.featurize(synthetic_corpus)


@pytest.fixture(scope="session")
def trained_model(synthetic_corpus, corpus_features):
    return emotion.train(synthetic_corpus, emotion.TrainingConfig(), features=corpus_features)
