"""Rule-based accompaniment: per-bar chord detection, phrase-template matching
and realisation on the detected chords.

Everything is expressed relative to the key's tonic, so transposing the
melody transposes the accompaniment by the same interval.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .midi import MidiSong, NoteEvent, fold_pitch

BEATS_PER_BAR = 4
EPS = 1e-9
RHYTHM_WEIGHT = 0.5
CHORD_WEIGHT = 0.5

MAJOR_SCALE = (0, 2, 4, 5, 7, 9, 11)
MINOR_SCALE = (0, 2, 3, 5, 7, 8, 10)  # natural minor
_QUALITY_INTERVALS = {"major": (0, 4, 7), "minor": (0, 3, 7), "diminished": (0, 3, 6)}


@dataclass(frozen=True)
class ChordLabel:
    bar_index: int
    root_pc: int
    quality: str

    def __post_init__(self):
        if not 0 <= self.root_pc <= 11:
            raise ValueError(f"root_pc {self.root_pc} outside [0, 11]")
        if self.quality not in _QUALITY_INTERVALS:
            raise ValueError(f"unknown chord quality {self.quality!r}")

    @property
    def pitch_classes(self):
        return tuple((self.root_pc + i) % 12 for i in _QUALITY_INTERVALS[self.quality])


@dataclass(frozen=True)
class TemplateEvent:
    beat_offset: Fraction
    voicing: tuple  # diatonic steps above the chord root (0 root, 2 third, 4 fifth, 7 octave)
    duration_beats: Fraction


@dataclass(frozen=True)
class PhraseTemplate:
    id: str
    events: tuple

    def __post_init__(self):
        if not self.events:
            raise ValueError(f"template {self.id!r} has no events")
        for ev in self.events:
            if not 0 <= ev.beat_offset < BEATS_PER_BAR:
                raise ValueError(f"template {self.id!r}: offset {ev.beat_offset} outside the bar")
            if ev.duration_beats <= 0:
                raise ValueError(f"template {self.id!r}: non-positive duration")
            if not ev.voicing:
                raise ValueError(f"template {self.id!r}: empty voicing")

    @property
    def rhythm_density(self):
        return len(self.events) / BEATS_PER_BAR

    @property
    def tones(self):
        return [d for ev in self.events for d in ev.voicing]


@dataclass(frozen=True)
class Accompaniment:
    events: tuple
    channel: int = 1


# --- template library ------------------------------------------------------

def _frac_list(text):
    return [Fraction(tok) for tok in text.split()]


def parse_template_line(line):
    """Parse ``id | offsets | voicings | durations``.

    Offsets and durations are whitespace-separated beats (fractions allowed,
    e.g. ``1/2``); voicings are ``;``-separated groups of comma-separated
    diatonic steps above the chord root.
    """
    parts = [p.strip() for p in line.split("|")]
    if len(parts) != 4:
        raise ValueError(f"template record needs 4 '|'-separated fields: {line!r}")
    tid, offsets, voicings, durations = parts
    offs = _frac_list(offsets)
    durs = _frac_list(durations)
    voices = [tuple(int(v) for v in grp.split(",")) for grp in voicings.split(";")]
    if not (len(offs) == len(durs) == len(voices)):
        raise ValueError(f"template {tid!r}: field lengths differ")
    return PhraseTemplate(tid, tuple(TemplateEvent(o, v, d) for o, v, d in zip(offs, voices, durs)))


def parse_template_library(text):
    """Parse a template library; blank lines and ``#`` comments are skipped."""
    templates = [parse_template_line(line) for line in text.splitlines()
                 if line.strip() and not line.lstrip().startswith("#")]
    ids = [t.id for t in templates]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate template ids")
    return tuple(sorted(templates, key=lambda t: t.id))


BUILTIN_LIBRARY_TEXT = """\
# id | beat offsets | voicings (diatonic steps above chord root) | durations (beats)
pad-whole      | 0 | 0,2,4 | 4
pad-half       | 0 2 | 0,2,4;0,2,4 | 2 2
bass-fifth     | 0 2 | 0;4 | 2 2
block-quarter  | 0 1 2 3 | 0,2,4;2,4,7;0,2,4;2,4,7 | 1 1 1 1
alberti        | 0 1 2 3 | 0;4;2;4 | 1 1 1 1
waltz-like     | 0 1 2 3 | 0;2,4;2,4;2,4 | 1 1 1 1
arp-eighth-up  | 0 1/2 1 3/2 2 5/2 3 7/2 | 0;2;4;7;4;2;0;2 | 1/2 1/2 1/2 1/2 1/2 1/2 1/2 1/2
arp-eighth-pass| 0 1/2 1 3/2 2 5/2 3 7/2 | 0;1;2;3;4;3;2;1 | 1/2 1/2 1/2 1/2 1/2 1/2 1/2 1/2
broken-sixteen | 0 1/4 1/2 3/4 1 5/4 3/2 7/4 2 9/4 5/2 11/4 3 13/4 7/2 15/4 | 0;2;4;7;0;2;4;7;0;2;4;7;0;2;4;7 | 1/4 1/4 1/4 1/4 1/4 1/4 1/4 1/4 1/4 1/4 1/4 1/4 1/4 1/4 1/4 1/4
"""

BUILTIN_TEMPLATES = parse_template_library(BUILTIN_LIBRARY_TEXT)


# --- chord detection -------------------------------------------------------

def scale_for(mode):
    return MAJOR_SCALE if mode == "major" else MINOR_SCALE


def diatonic_triads(key):
    """The seven triads of ``key`` as (root offset above tonic, quality)."""
    scale = scale_for(key.mode)
    triads = []
    for degree in range(7):
        root = scale[degree]
        third = (scale[(degree + 2) % 7] - root) % 12
        fifth = (scale[(degree + 4) % 7] - root) % 12
        quality = {(4, 7): "major", (3, 7): "minor", (3, 6): "diminished"}[(third, fifth)]
        triads.append((root, quality))
    return triads


def _fifths_distance(interval):
    steps = (interval * 7) % 12
    return min(steps, 12 - steps)


def bar_ticks(song):
    return BEATS_PER_BAR * song.ticks_per_quarter


def bar_histograms(song):
    """Duration-weighted pitch-class histogram per 4/4 bar, shape (n_bars, 12)."""
    width = bar_ticks(song)
    n_bars = -(-song.end_ticks // width)
    hist = np.zeros((n_bars, 12))
    for e in song.notes:
        start, end = e.onset_ticks, e.end_ticks
        for bar in range(start // width, (end - 1) // width + 1):
            lo = max(start, bar * width)
            hi = min(end, (bar + 1) * width)
            hist[bar, e.pitch % 12] += hi - lo
    return hist


def detect_chords(song, key):
    """Label each bar with the best-matching diatonic triad of ``key``.

    Ties go to the root closest to the tonic on the circle of fifths, then to
    the smaller interval above the tonic.  Silent bars repeat the previous
    label (the tonic triad for bar 0).
    """
    if not song.notes:
        raise ValueError("cannot detect chords of an empty song")
    triads = diatonic_triads(key)
    masks = np.zeros((7, 12))
    for i, (root, quality) in enumerate(triads):
        for iv in _QUALITY_INTERVALS[quality]:
            masks[i, (root + iv) % 12] = 1.0
    rank = sorted(range(7), key=lambda i: (_fifths_distance(triads[i][0]), triads[i][0]))
    labels = []
    previous = triads[0]
    for bar, hist in enumerate(bar_histograms(song)):
        if hist.sum() > 0:
            rel = np.roll(hist, -key.tonic_pc)
            scores = masks @ rel
            best = max(scores)
            previous = triads[next(i for i in rank if scores[i] == best)]
        root, quality = previous
        labels.append(ChordLabel(bar, (root + key.tonic_pc) % 12, quality))
    return labels


# --- fitness and realisation ----------------------------------------------

def chord_tone_fraction(template):
    """Share of voicing tones that land on root, third or fifth."""
    tones = template.tones
    return sum(1 for d in tones if d % 7 in (0, 2, 4)) / len(tones)


def fitness(template, chord, melody_bar_density):
    """Score in [0, 1] mixing rhythm-density agreement and chord-tone share.

    Voicings are diatonic steps stacked on the chord root, so steps 0/2/4
    (mod 7) are chord tones for every diatonic triad, diminished included.
    """
    if melody_bar_density < 0:
        raise ValueError("melody_bar_density must be >= 0")
    if not 0 <= chord.root_pc <= 11:
        raise ValueError("invalid chord")
    td = template.rhythm_density
    rhythm = 1.0 - abs(td - melody_bar_density) / max(td, melody_bar_density, EPS)
    return RHYTHM_WEIGHT * rhythm + CHORD_WEIGHT * chord_tone_fraction(template)


def _seed_hash(seed, *parts):
    text = ":".join(str(p) for p in (seed, *parts)).encode()
    return int.from_bytes(hashlib.sha256(text).digest()[:8], "big")


def _realise(template, chord, key, inversion, anchor, bar_start, tpq):
    """Turn one template into (onset, duration, pitch) triples for one bar.

    ``anchor`` is the tonic pitch the scale positions are measured from.
    """
    scale = scale_for(key.mode)
    root_rel = (chord.root_pc - key.tonic_pc) % 12
    degree = scale.index(root_rel)
    events = []
    for ev in template.events:
        for step in ev.voicing:
            d = degree + step
            # rotate lower voicing tones up an octave for the chosen inversion
            if step % 7 in (0, 2, 4)[:inversion] and step < 7:
                d += 7
            octave, idx = divmod(d, 7)
            pitch = anchor + scale[idx] + 12 * octave
            onset = bar_start + int(ev.beat_offset * tpq)
            dur = max(1, int(ev.duration_beats * tpq))
            events.append((onset, dur, fold_pitch(pitch)))
    return events


def harmonize(song, key, seed=0, templates=BUILTIN_TEMPLATES, channel=None, velocity=None):
    """Generate a deterministic accompaniment for ``song`` in ``key``.

    Per bar, the template with the highest :func:`fitness` against the bar's
    chord and melodic rhythm density is chosen (ties by template id).  A new
    run of a template picks its inversion from a seed-keyed hash; consecutive
    bars with the same template keep that inversion.  The register is tied to
    the melody's lowest note so the result follows transposition.
    """
    notes = song.notes
    if not notes:
        raise ValueError("cannot harmonize an empty song")
    templates = sorted(templates, key=lambda t: t.id)
    chords = detect_chords(song, key)
    width = bar_ticks(song)
    tpq = song.ticks_per_quarter
    if channel is None:
        used = set(song.channels)
        channel = next(c for c in range(16) if c not in used)
    if velocity is None:
        velocity = max(1, min(127, round(0.7 * sum(e.velocity for e in notes) / len(notes))))
    lowest = min(e.pitch for e in notes)
    onsets_per_bar = np.zeros(len(chords))
    for e in notes:
        onsets_per_bar[e.onset_ticks // width] += 1
    end = song.end_ticks
    out = []
    prev_id = None
    inversion = 0
    for chord in chords:
        density = onsets_per_bar[chord.bar_index] / BEATS_PER_BAR
        scores = [fitness(t, chord, density) for t in templates]
        best = templates[scores.index(max(scores))]
        if best.id != prev_id:
            inversion = _seed_hash(seed, chord.bar_index, best.id) % 3
            prev_id = best.id
        # root an octave-plus below the melody floor, relative to the tonic
        rel = (chord.root_pc - key.tonic_pc) % 12
        tonic_below = lowest - 12 - ((lowest - key.tonic_pc) % 12)
        anchor = tonic_below - (12 if rel else 0)
        bar_start = chord.bar_index * width
        for onset, dur, pitch in _realise(best, chord, key, inversion, anchor, bar_start, tpq):
            if onset >= end:
                continue
            dur = min(dur, end - onset)
            out.append(NoteEvent(onset, dur, pitch, velocity, channel))
    out.sort(key=lambda e: (e.onset_ticks, e.pitch, e.duration_ticks))
    return Accompaniment(tuple(out), channel)


def combine(song, accompaniment):
    """Melody tracks plus the accompaniment as an extra track."""
    return song.with_tracks(list(song.tracks) + [list(accompaniment.events)])
