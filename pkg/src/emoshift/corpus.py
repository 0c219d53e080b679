"""Synthetic, quadrant-controlled training clips.

Each quadrant maps to a recipe of musical controls (tempo, mode, register,
timbre, loudness) drawn with seeded jitter, so a small classifier can be
trained and checked without an external dataset.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .circumplex import Quadrant
from .emotion import LabeledClip, write_manifest
from .harmony import MAJOR_SCALE, MINOR_SCALE, harmonize
from .midi import KeyEstimate, MidiSong, NoteEvent
from .synth import InstrumentProfile, render, write_wav_file

TPQ = 480


@dataclass(frozen=True)
class Recipe:
    tempo_bpm: tuple  # (low, high)
    mode: str
    tonic_octave: int  # MIDI octave of the tonic (C4 = 60 -> octave 4)
    beat_choices: tuple  # note lengths in beats
    velocity: tuple
    timbre: str  # "bright" | "harsh" | "dark" | "soft"
    gain: tuple


RECIPES = {
    Quadrant.Q1: Recipe((130, 170), "major", 5, (0.5, 0.5, 1.0), (95, 120), "bright", (0.7, 0.9)),
    Quadrant.Q2: Recipe((130, 170), "minor", 4, (0.5, 0.5, 1.0), (95, 120), "harsh", (0.7, 0.9)),
    Quadrant.Q3: Recipe((55, 80), "minor", 3, (1.0, 2.0, 2.0), (40, 70), "dark", (0.12, 0.25)),
    Quadrant.Q4: Recipe((55, 80), "major", 4, (1.0, 2.0, 2.0), (40, 70), "soft", (0.12, 0.25)),
}


def _timbre(kind, gain, rng):
    n = int(rng.integers(4, 9))
    if kind == "bright":
        waveform = ("sawtooth", "square")[int(rng.integers(2))]
        amps = tuple(float(v) for v in rng.uniform(0.6, 1.0, n))
        adsr = (float(rng.uniform(0.0, 0.02)), 0.1, float(rng.uniform(0.6, 0.9)), 0.05)
    elif kind == "harsh":
        waveform = "square"
        amps = tuple(float(v) for v in rng.uniform(0.8, 1.0, n + 3))
        adsr = (0.0, 0.05, float(rng.uniform(0.8, 1.0)), 0.02)
    elif kind == "dark":
        waveform = "sine"
        amps = (1.0,) + tuple(float(v) for v in rng.uniform(0.0, 0.25, 2))
        adsr = (float(rng.uniform(0.1, 0.3)), 0.3, float(rng.uniform(0.5, 0.8)), 0.4)
    else:
        waveform = ("sine", "triangle")[int(rng.integers(2))]
        amps = (1.0,) + tuple(float(v) for v in rng.uniform(0.1, 0.4, 3))
        adsr = (float(rng.uniform(0.05, 0.15)), 0.2, float(rng.uniform(0.6, 0.9)), 0.3)
    return InstrumentProfile(f"synthetic-{kind}", waveform, amps, adsr, gain)


def synthetic_melody(quadrant, rng, bars=4):
    """Random diatonic melody shaped by the quadrant's recipe.

    Returns ``(song, key, profile)``.  Strong beats favour tonic-triad tones
    so the mode is audible; the last note is the tonic.
    """
    recipe = RECIPES[Quadrant(quadrant)]
    tonic_pc = int(rng.integers(12))
    key = KeyEstimate(tonic_pc, recipe.mode)
    scale = MAJOR_SCALE if recipe.mode == "major" else MINOR_SCALE
    tonic = 12 * (recipe.tonic_octave + 1) + tonic_pc
    bpm = float(rng.uniform(*recipe.tempo_bpm))
    tempo_us = int(round(60e6 / bpm))
    total = bars * 4 * TPQ
    events = []
    tick = 0
    degree = 0
    while tick < total:
        beats = float(rng.choice(recipe.beat_choices))
        dur = min(int(beats * TPQ), total - tick)
        if tick + dur >= total:
            degree = 0 if degree < 4 else 7
        elif tick % TPQ == 0:
            degree = int(rng.choice([0, 2, 4, 7, -3, 2, 4]))
        else:
            degree = int(np.clip(degree + rng.choice([-2, -1, 1, 2]), -3, 9))
        octave, idx = divmod(degree, 7)
        pitch = tonic + scale[idx] + 12 * octave
        velocity = int(rng.integers(recipe.velocity[0], recipe.velocity[1] + 1))
        events.append(NoteEvent(tick, dur, pitch, velocity, 0))
        tick += dur
    song = MidiSong(TPQ, tempo_us, [events])
    profile = _timbre(recipe.timbre, float(rng.uniform(*recipe.gain)), rng)
    return song, key, profile


def render_example(quadrant, rng, bars=4, sample_rate_hz=16000, accompany=True):
    song, key, profile = synthetic_melody(quadrant, rng, bars)
    accomp = harmonize(song, key, seed=int(rng.integers(2**31))) if accompany else None
    return render(song, accomp, profile, profile, sample_rate_hz), song


def generate_synthetic_corpus(n_per_quadrant, seed=0, bars=4, sample_rate_hz=16000):
    """``4 * n_per_quadrant`` labelled clips, ordered Q1, Q2, Q3, Q4, Q1, ...

    Every clip draws from its own seeded stream, so the output depends only on
    ``(n_per_quadrant, seed)``.
    """
    if n_per_quadrant < 1:
        raise ValueError("n_per_quadrant must be >= 1")
    corpus = []
    for i in range(n_per_quadrant):
        for q in Quadrant:
            rng = np.random.default_rng([seed, i, int(q)])
            clip, _ = render_example(q, rng, bars, sample_rate_hz)
            corpus.append(LabeledClip(clip, quadrant=q))
    return corpus


def write_corpus(corpus, outdir):
    """Write clips as WAV files plus ``manifest.csv``; returns the manifest path."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, item in enumerate(corpus):
        name = f"clip_{i:04d}_{item.quadrant.name}.wav"
        write_wav_file(item.audio(), outdir / name)
        rows.append((name, item.quadrant))
    manifest = outdir / "manifest.csv"
    write_manifest(rows, manifest)
    return manifest


def q1_melody(seed, bars=4):
    """A happy-style melody (fast, major, high register) for sweep experiments."""
    song, _, _ = synthetic_melody(Quadrant.Q1, np.random.default_rng([seed, 101]), bars)
    return song
