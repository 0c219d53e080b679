"""Additive synthesis of MIDI songs through instrument profiles, plus WAV I/O."""

from __future__ import annotations

import configparser
import io
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels

DEFAULT_SAMPLE_RATE = 16000
PEAK_TARGET = 0.9
WAVEFORMS = ("sine", "square", "sawtooth", "triangle")


class WavError(ValueError):
    """Raised for unreadable or unsupported WAV data."""


@dataclass(frozen=True)
class InstrumentProfile:
    """Timbre definition standing in for a SoundFont.

    Partial ``k`` (1-based) of a note at ``f0`` sounds at ``k * f0`` with
    amplitude ``series(waveform, k) * harmonic_amplitudes[k - 1]``.  For
    ``sine`` the series is 1 for every k, so the harmonic amplitudes are the
    partial amplitudes; for the other waveforms they weight the waveform's
    band-limited Fourier series.
    """

    name: str
    waveform: str = "sine"
    harmonic_amplitudes: tuple = (1.0,)
    adsr: tuple = (0.01, 0.1, 0.7, 0.1)
    gain: float = 0.5

    def __post_init__(self):
        if self.waveform not in WAVEFORMS:
            raise ValueError(f"unknown waveform {self.waveform!r}")
        amps = tuple(float(a) for a in self.harmonic_amplitudes)
        if not amps or any(not math.isfinite(a) or a < 0 for a in amps):
            raise ValueError("harmonic amplitudes must be finite, non-negative and non-empty")
        object.__setattr__(self, "harmonic_amplitudes", amps)
        if len(self.adsr) != 4:
            raise ValueError("adsr needs (attack_s, decay_s, sustain_level, release_s)")
        adsr = tuple(float(v) for v in self.adsr)
        if any(not math.isfinite(v) or v < 0 for v in adsr) or adsr[2] > 1:
            raise ValueError(f"invalid adsr {self.adsr}")
        object.__setattr__(self, "adsr", adsr)
        if not 0 < self.gain <= 1:
            raise ValueError(f"gain {self.gain} outside (0, 1]")

    def partial_amplitudes(self):
        k = np.arange(1, len(self.harmonic_amplitudes) + 1, dtype=np.float64)
        if self.waveform == "sine":
            series = np.ones_like(k)
        elif self.waveform == "square":
            series = np.where(k % 2 == 1, 1.0 / k, 0.0)
        elif self.waveform == "sawtooth":
            series = 1.0 / k
        else:
            series = np.where(k % 2 == 1, (-1.0) ** ((k - 1) // 2) / k ** 2, 0.0)
        return series * np.asarray(self.harmonic_amplitudes)


BUILTIN_PROFILES = {
    p.name: p for p in (
        InstrumentProfile("piano-like", "sine", (1.0, 0.5, 0.3, 0.15, 0.08, 0.04),
                          (0.005, 0.6, 0.25, 0.25), 0.6),
        InstrumentProfile("strings-like", "sawtooth", (1.0, 0.9, 0.7, 0.5, 0.35, 0.2, 0.1, 0.05),
                          (0.25, 0.2, 0.85, 0.35), 0.5),
        InstrumentProfile("organ-like", "sine", (1.0, 0.0, 0.6, 0.0, 0.4, 0.0, 0.25, 0.0),
                          (0.02, 0.02, 1.0, 0.05), 0.5),
        # square-wave lead in the spirit of console game music
        InstrumentProfile("chiptune", "square", (1.0,) * 9, (0.0, 0.0, 1.0, 0.02), 0.8),
    )
}


def get_profile(name):
    try:
        return BUILTIN_PROFILES[name]
    except KeyError:
        raise KeyError(f"unknown profile {name!r}; built-ins: {', '.join(sorted(BUILTIN_PROFILES))}") from None


def parse_profiles(text):
    """Read profiles from INI text, one section per profile::

        [bright-bell]
        waveform = sine
        harmonics = 1.0 0.4 0.2
        adsr = 0.001 0.8 0.0 0.5
        gain = 0.7
    """
    parser = configparser.ConfigParser()
    parser.read_string(text)
    profiles = []
    for name in parser.sections():
        sec = parser[name]
        profiles.append(InstrumentProfile(
            name,
            sec.get("waveform", "sine"),
            tuple(float(v) for v in sec.get("harmonics", "1.0").split()),
            tuple(float(v) for v in sec.get("adsr", "0.01 0.1 0.7 0.1").split()),
            sec.getfloat("gain", 0.5),
        ))
    return profiles


def format_profiles(profiles):
    parser = configparser.ConfigParser()
    for p in profiles:
        parser[p.name] = {
            "waveform": p.waveform,
            "harmonics": " ".join(repr(a) for a in p.harmonic_amplitudes),
            "adsr": " ".join(repr(v) for v in p.adsr),
            "gain": repr(p.gain),
        }
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray = field(repr=False)
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if self.sample_rate_hz <= 0:
            raise ValueError("sample rate must be positive")
        if samples.size and (not np.all(np.isfinite(samples)) or np.max(np.abs(samples)) > 1.0):
            raise ValueError("samples must be finite and within [-1, 1]")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self):
        return self.samples.size / self.sample_rate_hz

    def __eq__(self, other):
        if not isinstance(other, AudioClip):
            return NotImplemented
        return (self.sample_rate_hz == other.sample_rate_hz
                and np.array_equal(self.samples, other.samples))

    __hash__ = None


def pitch_to_freq(pitch):
    """Equal-tempered frequency in Hz, A4 (69) = 440 Hz."""
    if not 0 <= pitch <= 127:
        raise ValueError(f"pitch {pitch} outside [0, 127]")
    return 440.0 * 2.0 ** ((pitch - 69) / 12.0)


def _note_layers(notes, profile, seconds_per_tick, sample_rate):
    attack, decay, sustain, release = profile.adsr
    partials = profile.partial_amplitudes()
    k = np.arange(1, partials.size + 1, dtype=np.float64)
    nyquist = sample_rate / 2.0
    attack_n = int(round(attack * sample_rate))
    decay_n = int(round(decay * sample_rate))
    release_n = int(round(release * sample_rate))
    for e in notes:
        start = int(round(e.onset_ticks * seconds_per_tick * sample_rate))
        n_on = max(1, int(round(e.duration_ticks * seconds_per_tick * sample_rate)))
        freqs = pitch_to_freq(e.pitch) * k
        keep = (freqs < nyquist) & (partials != 0.0)
        yield (start, n_on + release_n, n_on,
               2.0 * np.pi * freqs[keep] / sample_rate,
               partials[keep] * (profile.gain * e.velocity / 127.0),
               (attack_n, decay_n, sustain, release_n))


def mix(song, accompaniment=None, melody_profile=None, accomp_profile=None,
        sample_rate_hz=DEFAULT_SAMPLE_RATE):
    """Linear mix of all notes before any normalisation, as float64 samples."""
    if sample_rate_hz < 8000:
        raise ValueError("sample rate must be at least 8000 Hz")
    melody_profile = melody_profile or BUILTIN_PROFILES["piano-like"]
    accomp_profile = accomp_profile or melody_profile
    spt = song.seconds_per_tick
    jobs = list(_note_layers(song.notes, melody_profile, spt, sample_rate_hz))
    if accompaniment is not None:
        jobs += list(_note_layers(accompaniment.events, accomp_profile, spt, sample_rate_hz))
    length = max((start + n for start, n, *_ in jobs), default=0)
    out = np.zeros(length, dtype=np.float64)
    for start, _, n_on, omegas, amps, (a_n, d_n, sus, r_n) in jobs:
        if omegas.size == 0:
            continue
        env = kernels.adsr_envelope(n_on, a_n, d_n, sus, r_n)
        kernels.add_partials(out, start, env, omegas, amps)
    return out


def render(song, accompaniment=None, melody_profile=None, accomp_profile=None,
           sample_rate_hz=DEFAULT_SAMPLE_RATE):
    """Synthesize ``song`` (and optional accompaniment) into a mono clip.

    The clip ends where the last release ends.  If the mixed peak exceeds
    0.9 the whole clip is scaled down to a 0.9 peak; quieter mixes are left
    untouched so profile gain and velocity survive into the audio.
    """
    out = mix(song, accompaniment, melody_profile, accomp_profile, sample_rate_hz)
    peak = float(np.max(np.abs(out))) if out.size else 0.0
    if peak > PEAK_TARGET:
        out *= PEAK_TARGET / peak
    return AudioClip(out, sample_rate_hz)


# --- WAV -------------------------------------------------------------------

def write_wav(clip):
    """16-bit PCM mono little-endian RIFF/WAVE bytes."""
    pcm = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2").tobytes()
    rate = clip.sample_rate_hz
    header = b"RIFF" + struct.pack("<I", 36 + len(pcm)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, rate, rate * 2, 2, 16)
    header += b"data" + struct.pack("<I", len(pcm))
    return header + pcm


def resample(samples, src_rate, dst_rate):
    """Linear-interpolation resampling; output length round(n * dst / src)."""
    samples = np.asarray(samples, dtype=np.float64)
    if src_rate == dst_rate or samples.size == 0:
        return samples.copy()
    n_out = int(round(samples.size * dst_rate / src_rate))
    return kernels.linear_resample(samples, n_out, src_rate / dst_rate)


def read_wav(data, sample_rate_hz=None):
    """Decode 16-bit PCM WAV bytes (mono or stereo) into a mono clip.

    Stereo is averaged; if ``sample_rate_hz`` is given and differs from the
    file's rate the samples are linearly resampled.
    """
    data = bytes(data)
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavError("not a RIFF/WAVE file")
    pos = 12
    fmt = None
    pcm = None
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        size = struct.unpack("<I", data[pos + 4:pos + 8])[0]
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise WavError(f"truncated {cid.decode('latin-1')!r} chunk")
        if cid == b"fmt ":
            if size < 16:
                raise WavError("fmt chunk too short")
            fmt = struct.unpack("<HHIIHH", body[:16])
            if fmt[0] == 0xFFFE and size >= 26:
                # WAVE_FORMAT_EXTENSIBLE: the real tag leads the subformat GUID
                fmt = (struct.unpack("<H", body[24:26])[0],) + fmt[1:]
        elif cid == b"data":
            pcm = body
        pos += 8 + size + (size & 1)
    if fmt is None or pcm is None:
        raise WavError("missing fmt or data chunk")
    tag, channels, rate, _, block_align, bits = fmt
    if tag != 1 or bits != 16:
        raise WavError(f"only 16-bit PCM is supported (format tag {tag}, {bits} bits)")
    if channels not in (1, 2):
        raise WavError(f"unsupported channel count {channels}")
    if rate <= 0:
        raise WavError("invalid sample rate")
    usable = len(pcm) - len(pcm) % (2 * channels)
    frames = np.frombuffer(pcm[:usable], dtype="<i2").astype(np.float64) / 32768.0
    if channels == 2:
        frames = frames.reshape(-1, 2).mean(axis=1)
    if sample_rate_hz is not None and sample_rate_hz != rate:
        frames = resample(frames, rate, sample_rate_hz)
        rate = sample_rate_hz
    return AudioClip(np.clip(frames, -1.0, 1.0), rate)


def read_wav_file(path, sample_rate_hz=None):
    with open(path, "rb") as fh:
        return read_wav(fh.read(), sample_rate_hz)


def write_wav_file(clip, path):
    with open(path, "wb") as fh:
        fh.write(write_wav(clip))
