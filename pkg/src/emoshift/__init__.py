"""Emotion-directed transposition and re-orchestration of MIDI melodies."""

from ._accel import BACKEND
from .circumplex import CircumplexPoint, EmotionTarget, Quadrant, distance, map_to_plane, plot_svg
from .emotion import (ClassifierModel, LabeledClip, QuadrantProbs, TrainingConfig, classify,
                      engineer_labels, evaluate, predict_quadrant, train)
from .features import extract_features
from .harmony import detect_chords, fitness, harmonize
from .midi import (KeyEstimate, MidiSong, NoteEvent, detect_key, enumerate_transpositions,
                   parse_midi, transpose, write_midi)
from .pipeline import baseline, select_best, sweep, transform_once
from .synth import AudioClip, InstrumentProfile, pitch_to_freq, read_wav, render, write_wav

__version__ = "0.1.0"
