"""Standard MIDI File reading/writing, key estimation and transposition."""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field, replace

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_TEMPO = 500000
PITCH_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")

# Krumhansl-Kessler probe-tone ratings, tonic first.
KK_MAJOR = np.array([6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88])
KK_MINOR = np.array([6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17])


class MidiError(ValueError):
    """Raised for malformed or unsupported MIDI data."""


@dataclass(frozen=True, order=True)
class NoteEvent:
    onset_ticks: int
    duration_ticks: int
    pitch: int
    velocity: int = 100
    channel: int = 0

    def __post_init__(self):
        if self.onset_ticks < 0:
            raise ValueError(f"negative onset {self.onset_ticks}")
        if self.duration_ticks <= 0:
            raise ValueError(f"duration must be positive, got {self.duration_ticks}")
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} outside [0, 127]")
        if not 1 <= self.velocity <= 127:
            raise ValueError(f"velocity {self.velocity} outside [1, 127]")
        if not 0 <= self.channel <= 15:
            raise ValueError(f"channel {self.channel} outside [0, 15]")

    @property
    def end_ticks(self):
        return self.onset_ticks + self.duration_ticks


def _canonical(events):
    return tuple(sorted(events, key=lambda e: (e.onset_ticks, e.channel, e.pitch,
                                               e.duration_ticks, e.velocity)))


@dataclass(frozen=True)
class MidiSong:
    """Parsed symbolic music: note events per track plus a single tempo.

    Events inside each track are kept in canonical order (onset, channel,
    pitch, ...), which makes structural equality a usable round-trip check.
    """

    ticks_per_quarter: int = 480
    tempo_us_per_quarter: int = DEFAULT_TEMPO
    tracks: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.ticks_per_quarter <= 0 or self.ticks_per_quarter > 0x7FFF:
            raise ValueError(f"invalid ticks_per_quarter {self.ticks_per_quarter}")
        if not 0 < self.tempo_us_per_quarter <= 0xFFFFFF:
            raise ValueError(f"invalid tempo {self.tempo_us_per_quarter}")
        object.__setattr__(self, "tracks", tuple(_canonical(t) for t in self.tracks))

    @property
    def notes(self):
        """All events of all tracks, canonically ordered."""
        return _canonical(e for t in self.tracks for e in t)

    @property
    def end_ticks(self):
        return max((e.end_ticks for e in self.notes), default=0)

    @property
    def seconds_per_tick(self):
        return self.tempo_us_per_quarter / 1e6 / self.ticks_per_quarter

    @property
    def channels(self):
        return sorted({e.channel for e in self.notes})

    def with_tracks(self, tracks):
        return replace(self, tracks=tuple(tracks))


@dataclass(frozen=True)
class KeyEstimate:
    tonic_pc: int
    mode: str
    confidence: float = 1.0

    def __post_init__(self):
        if not 0 <= self.tonic_pc <= 11:
            raise ValueError(f"tonic_pc {self.tonic_pc} outside [0, 11]")
        if self.mode not in ("major", "minor"):
            raise ValueError(f"mode must be 'major' or 'minor', got {self.mode!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def name(self):
        return f"{PITCH_NAMES[self.tonic_pc]} {self.mode}"


def pitch_name(pitch):
    """Scientific pitch name with C4 = 60, e.g. ``pitch_name(57) == 'A3'``."""
    return f"{PITCH_NAMES[pitch % 12]}{pitch // 12 - 1}"


def parse_pitch_name(name):
    """Inverse of :func:`pitch_name`; accepts sharps ('#') and flats ('b')."""
    text = name.strip()
    if not text:
        raise ValueError("empty pitch name")
    letter = text[0].upper()
    if letter not in "CDEFGAB":
        raise ValueError(f"bad pitch name {name!r}")
    pc = PITCH_NAMES.index(letter)
    rest = text[1:]
    while rest[:1] in ("#", "b"):
        pc += 1 if rest[0] == "#" else -1
        rest = rest[1:]
    try:
        octave = int(rest)
    except ValueError:
        raise ValueError(f"bad pitch name {name!r}") from None
    pitch = (octave + 1) * 12 + pc
    if not 0 <= pitch <= 127:
        raise ValueError(f"pitch name {name!r} outside MIDI range")
    return pitch


# --- SMF reading -----------------------------------------------------------

def _read_vlq(data, pos, end):
    value = 0
    for _ in range(4):
        if pos >= end:
            raise MidiError("truncated variable-length quantity")
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise MidiError("variable-length quantity longer than 4 bytes")


_DATA_LEN = {0x80: 2, 0x90: 2, 0xA0: 2, 0xB0: 2, 0xC0: 1, 0xD0: 1, 0xE0: 2}


def _parse_track(data, pos, end, track_index):
    """Return (notes, first tempo or None) for one MTrk body."""
    notes = []
    tempo = None
    pending = {}  # (channel, pitch) -> list of (onset, velocity), FIFO
    tick = 0
    status = None
    while pos < end:
        delta, pos = _read_vlq(data, pos, end)
        tick += delta
        if pos >= end:
            raise MidiError("truncated event")
        byte = data[pos]
        if byte == 0xFF:
            if pos + 2 > end:
                raise MidiError("truncated meta event")
            meta_type = data[pos + 1]
            length, pos = _read_vlq(data, pos + 2, end)
            if pos + length > end:
                raise MidiError("truncated meta event payload")
            payload = data[pos:pos + length]
            pos += length
            if meta_type == 0x51 and length == 3 and tempo is None:
                tempo = int.from_bytes(payload, "big")
            elif meta_type == 0x2F:
                break
            continue
        if byte in (0xF0, 0xF7):
            length, pos = _read_vlq(data, pos + 1, end)
            pos += length
            if pos > end:
                raise MidiError("truncated sysex event")
            status = None
            continue
        if byte & 0x80:
            status = byte
            pos += 1
        elif status is None:
            raise MidiError("running status without a preceding status byte")
        kind = status & 0xF0
        if kind not in _DATA_LEN:
            raise MidiError(f"unsupported status byte 0x{status:02X}")
        n = _DATA_LEN[kind]
        if pos + n > end:
            raise MidiError("truncated channel event")
        args = data[pos:pos + n]
        pos += n
        channel = status & 0x0F
        if kind == 0x90 and args[1] > 0:
            pending.setdefault((channel, args[0]), []).append((tick, args[1]))
        elif kind in (0x80, 0x90):
            queue = pending.get((channel, args[0]))
            if not queue:
                continue  # stray note-off
            onset, velocity = queue.pop(0)
            if tick > onset:
                notes.append(NoteEvent(onset, tick - onset, args[0], velocity, channel))
    for (channel, pitch), queue in sorted(pending.items()):
        for onset, velocity in queue:
            log.warning("track %d: dangling note-on (channel %d, pitch %d, tick %d) "
                        "closed at track end", track_index, channel, pitch, onset)
            notes.append(NoteEvent(onset, max(1, tick - onset), pitch, velocity, channel))
    return notes, tempo


def parse_midi(data):
    """Parse SMF format 0 or 1 bytes into a :class:`MidiSong`."""
    data = bytes(data)
    if len(data) < 14 or data[:4] != b"MThd":
        raise MidiError("missing MThd header chunk")
    header_len = struct.unpack(">I", data[4:8])[0]
    if header_len < 6 or 8 + header_len > len(data):
        raise MidiError("malformed header chunk")
    fmt, ntracks, division = struct.unpack(">HHH", data[8:14])
    if fmt == 2:
        raise MidiError("SMF format 2 is not supported")
    if fmt not in (0, 1):
        raise MidiError(f"unknown SMF format {fmt}")
    if division & 0x8000:
        raise MidiError("SMPTE time division is not supported")
    if division == 0:
        raise MidiError("zero ticks per quarter note")
    pos = 8 + header_len
    tracks = []
    tempo = None
    while pos + 8 <= len(data) and len(tracks) < ntracks:
        chunk_type = data[pos:pos + 4]
        length = struct.unpack(">I", data[pos + 4:pos + 8])[0]
        body = pos + 8
        if body + length > len(data):
            raise MidiError("truncated track chunk")
        if chunk_type == b"MTrk":
            notes, track_tempo = _parse_track(data, body, body + length, len(tracks))
            tracks.append(notes)
            if tempo is None:
                tempo = track_tempo
        pos = body + length
    if len(tracks) < ntracks:
        raise MidiError(f"header announces {ntracks} tracks, found {len(tracks)}")
    return MidiSong(division, tempo if tempo is not None else DEFAULT_TEMPO, tracks)


# --- SMF writing -----------------------------------------------------------

def _vlq(value):
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


def _track_chunk(events, tempo):
    # (tick, order, bytes); note-offs sort before note-ons at the same tick
    timeline = []
    if tempo is not None:
        timeline.append((0, 0, b"\xff\x51\x03" + tempo.to_bytes(3, "big")))
    for e in events:
        timeline.append((e.onset_ticks, 2, bytes((0x90 | e.channel, e.pitch, e.velocity))))
        timeline.append((e.end_ticks, 1, bytes((0x80 | e.channel, e.pitch, 0))))
    timeline.sort(key=lambda item: (item[0], item[1], item[2]))
    body = bytearray()
    tick = 0
    for when, _, payload in timeline:
        body += _vlq(when - tick)
        body += payload
        tick = when
    body += b"\x00\xff\x2f\x00"
    return b"MTrk" + struct.pack(">I", len(body)) + bytes(body)


def write_midi(song):
    """Serialise ``song``; one MTrk per track, tempo in the first track."""
    tracks = list(song.tracks) or [()]
    fmt = 0 if len(tracks) == 1 else 1
    out = bytearray(b"MThd" + struct.pack(">IHHH", 6, fmt, len(tracks), song.ticks_per_quarter))
    for i, events in enumerate(tracks):
        out += _track_chunk(events, song.tempo_us_per_quarter if i == 0 else None)
    return bytes(out)


def read_midi_file(path):
    with open(path, "rb") as fh:
        return parse_midi(fh.read())


def write_midi_file(song, path):
    with open(path, "wb") as fh:
        fh.write(write_midi(song))


# --- analysis --------------------------------------------------------------

def fold_pitch(pitch):
    """Fold by whole octaves into [0, 127]."""
    while pitch > 127:
        pitch -= 12
    while pitch < 0:
        pitch += 12
    return pitch


def transpose(song, semitones, *, return_folds=False):
    """Shift every pitch by ``semitones``.

    Pitches leaving [0, 127] are folded back by octaves; the number of folded
    notes is logged and, with ``return_folds=True``, returned alongside the
    song.
    """
    if abs(semitones) > 127:
        raise ValueError(f"|semitones| must be <= 127, got {semitones}")
    folds = 0
    tracks = []
    for track in song.tracks:
        shifted = []
        for e in track:
            p = e.pitch + semitones
            if not 0 <= p <= 127:
                p = fold_pitch(p)
                folds += 1
            shifted.append(replace(e, pitch=p))
        tracks.append(shifted)
    if folds:
        log.info("transpose by %+d folded %d note(s) back into MIDI range", semitones, folds)
    out = song.with_tracks(tracks)
    return (out, folds) if return_folds else out


def pitch_class_histogram(events):
    """Duration-weighted pitch-class histogram (integer tick totals)."""
    hist = np.zeros(12, dtype=np.float64)
    for e in events:
        hist[e.pitch % 12] += e.duration_ticks
    return hist


def _pearson(x, y):
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    return float((xc * yc).sum() / denom) if denom > 0 else 0.0


def key_correlations(hist):
    """Correlation of ``hist`` with all 24 keys, shape (2, 12): [major, minor] x tonic.

    The histogram is rotated into each candidate tonic's frame rather than
    rotating the profile, so a transposed histogram reproduces the same
    numbers bit for bit in the shifted slots.
    """
    hist = np.asarray(hist, dtype=np.float64)
    out = np.empty((2, 12))
    for tonic in range(12):
        rotated = np.roll(hist, -tonic)
        out[0, tonic] = _pearson(rotated, KK_MAJOR)
        out[1, tonic] = _pearson(rotated, KK_MINOR)
    return out


def detect_key(song):
    """Krumhansl-Schmuckler key estimate from the duration-weighted histogram."""
    notes = song.notes
    if not notes:
        raise ValueError("cannot detect the key of an empty song")
    corr = key_correlations(pitch_class_histogram(notes))
    flat = corr.ravel()
    order = np.argsort(-flat, kind="stable")
    best, second = flat[order[0]], flat[order[1]]
    confidence = (best - second) / (1.0 - second) if second < 1.0 else 0.0
    mode_index, tonic = divmod(int(order[0]), 12)
    return KeyEstimate(tonic, ("major", "minor")[mode_index],
                       float(min(1.0, max(0.0, confidence))))


def enumerate_transpositions(song, lowest_target, highest_target):
    """List (target tonic name, semitone offset) for every target in the range.

    Offsets move the detected tonic, taken in octave 4 (C4 = 60), onto each
    absolute target pitch.
    """
    if not (0 <= lowest_target <= 127 and 0 <= highest_target <= 127):
        raise ValueError("transposition targets must be MIDI pitches")
    if lowest_target > highest_target:
        raise ValueError("lowest_target must not exceed highest_target")
    tonic = 60 + detect_key(song).tonic_pc
    return [(pitch_name(t), t - tonic) for t in range(lowest_target, highest_target + 1)]
