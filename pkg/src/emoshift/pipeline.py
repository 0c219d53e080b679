"""Baseline scoring, transposition x profile sweeps and best-candidate selection."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from . import harmony
from .circumplex import EmotionTarget, distance, map_to_plane
from .emotion import QuadrantProbs, classify
from .features import extract_features
from .midi import detect_key, enumerate_transpositions, pitch_name, transpose
from .synth import DEFAULT_SAMPLE_RATE, render

log = logging.getLogger(__name__)

REPORT_FORMAT = "emoshift-sweep"
REPORT_VERSION = 1
FULL_RANGE = (12, 119)  # C0 .. B8
CSV_COLUMNS = ["offset", "target_tonic", "profile",
               "p1_before", "p2_before", "p3_before", "p4_before",
               "p1_after", "p2_after", "p3_after", "p4_after",
               "x", "y", "distance", "status"]


@dataclass(frozen=True)
class TransformationCandidate:
    semitone_offset: int
    target_tonic: str
    profile_name: str
    probs_before: QuadrantProbs | None
    probs_after: QuadrantProbs | None
    point_after: object = None
    distance_to_target: float | None = None
    status: str = "ok"
    folded_notes: int = 0

    @property
    def ok(self):
        return self.status == "ok"


@dataclass(frozen=True)
class SweepReport:
    melody: str
    detected_key: str
    seed: int
    target: EmotionTarget
    radius: float
    sample_rate_hz: int
    key_range: tuple
    profiles: tuple
    source_profile: str
    source_probs: QuadrantProbs
    candidates: tuple = field(default_factory=tuple)
    best_index: int | None = None

    @property
    def source_point(self):
        return map_to_plane(self.source_probs, self.radius)

    @property
    def source_distance(self):
        return distance(self.source_point, self.target)

    @property
    def best(self):
        return self.candidates[self.best_index]


def score_clip(model, clip):
    return classify(model, extract_features(clip))


def baseline(melody, profile, model, sample_rate_hz=DEFAULT_SAMPLE_RATE):
    """Probabilities for the untouched melody rendered with ``profile``."""
    return score_clip(model, render(melody, None, profile, profile, sample_rate_hz))


def transform_once(melody, offset, profile, model, seed=0, *, accompany=True,
                   sample_rate_hz=DEFAULT_SAMPLE_RATE):
    """Transpose, re-harmonise, render and score one candidate.

    Returns ``(probabilities, clip, combined_song)`` where the combined song
    holds the transposed melody tracks plus the accompaniment track.
    """
    moved = transpose(melody, offset)
    accomp = harmony.harmonize(moved, detect_key(moved), seed) if accompany else None
    clip = render(moved, accomp, profile, profile, sample_rate_hz)
    combined = harmony.combine(moved, accomp) if accomp is not None else moved
    return score_clip(model, clip), clip, combined


# --- worker plumbing -------------------------------------------------------

_STATE = {}


def _init_worker(melody, model, profiles, sample_rate_hz, seed):
    _STATE.update(melody=melody, model=model, profiles=profiles,
                  sample_rate_hz=sample_rate_hz, seed=seed)


def _run_job(job):
    kind, offset, profile_index = job
    s = _STATE
    profile = s["profiles"][profile_index]
    try:
        if kind == "baseline":
            return tuple(baseline(s["melody"], profile, s["model"], s["sample_rate_hz"])), None, 0
        _, folds = transpose(s["melody"], offset, return_folds=True)
        probs, _, _ = transform_once(s["melody"], offset, profile, s["model"], s["seed"],
                                     sample_rate_hz=s["sample_rate_hz"])
        return tuple(probs), None, folds
    except Exception as exc:  # recorded per candidate, the sweep goes on
        return None, f"{type(exc).__name__}: {exc}", 0


def _run_jobs(jobs, workers, init_args):
    if workers <= 1:
        saved = dict(_STATE)
        try:
            _init_worker(*init_args)
            return [_run_job(j) for j in jobs]
        finally:
            _STATE.clear()
            _STATE.update(saved)
    chunk = max(1, len(jobs) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=init_args) as pool:
        return list(pool.map(_run_job, jobs, chunksize=chunk))


def default_workers():
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def sweep(melody, key_targets=FULL_RANGE, profiles=(), model=None, target=None, seed=0,
          workers=1, *, radius=1.0, sample_rate_hz=DEFAULT_SAMPLE_RATE, melody_name="",
          source_profile=None):
    """Score every (transposition target, profile) pair against ``target``.

    Each target pitch in ``key_targets`` (inclusive MIDI range) moves the
    detected tonic there; each candidate is re-harmonised, rendered with the
    profile and classified.  "Before" probabilities come from the plain
    melody under the same profile.  Candidate order is by offset, then
    profile name, whatever the worker count; failures become error rows.
    ``source_profile`` (default ``piano-like`` when swept, else the first
    profile) names the rendering used as the report's reference baseline.
    """
    profiles = tuple(sorted(profiles, key=lambda p: p.name))
    if not profiles:
        raise ValueError("sweep needs at least one profile")
    if len({p.name for p in profiles}) != len(profiles):
        raise ValueError("profile names must be unique")
    if model is None or target is None:
        raise ValueError("sweep needs a model and a target")
    lo, hi = key_targets
    targets = enumerate_transpositions(melody, lo, hi)
    names = [p.name for p in profiles]
    source = source_profile or ("piano-like" if "piano-like" in names else names[0])
    if source not in names:
        raise ValueError(f"source profile {source!r} is not among the swept profiles")

    jobs = [("baseline", 0, i) for i in range(len(profiles))]
    jobs += [("candidate", offset, i) for _, offset in targets for i in range(len(profiles))]
    results = _run_jobs(jobs, workers, (melody, model, profiles, sample_rate_hz, seed))
    before = results[:len(profiles)]
    after = results[len(profiles):]

    candidates = []
    for j, (tonic_name, offset) in enumerate(targets):
        for i, profile in enumerate(profiles):
            probs, err, folds = after[j * len(profiles) + i]
            base, base_err, _ = before[i]
            if err is None and base_err is not None:
                err = f"baseline failed: {base_err}"
            if err is not None:
                candidates.append(TransformationCandidate(
                    offset, tonic_name, profile.name,
                    QuadrantProbs(base) if base else None, None, status=f"error: {err}",
                    folded_notes=folds))
                continue
            point = map_to_plane(probs, radius)
            candidates.append(TransformationCandidate(
                offset, tonic_name, profile.name, QuadrantProbs(base), QuadrantProbs(probs),
                point, distance(point, target), folded_notes=folds))
    base_probs, base_err, _ = before[names.index(source)]
    if base_err is not None:
        raise RuntimeError(f"baseline rendering failed: {base_err}")
    report = SweepReport(melody_name, detect_key(melody).name, seed, target, radius,
                         sample_rate_hz, (pitch_name(lo), pitch_name(hi)), tuple(names), source,
                         QuadrantProbs(base_probs), tuple(candidates))
    if any(c.ok for c in candidates):
        best = select_best(report)
        report = replace(report, best_index=candidates.index(best))
    return report


def select_best(report):
    """Successful candidate closest to the target.

    Ties go to the smaller |offset|, then profile name, then the lower offset.
    """
    ok = [c for c in report.candidates if c.ok]
    if not ok:
        raise ValueError("every candidate in the report failed")
    return min(ok, key=lambda c: (c.distance_to_target, abs(c.semitone_offset),
                                  c.profile_name, c.semitone_offset))


# --- persistence -----------------------------------------------------------

def _target_doc(target):
    if target.quadrant is not None:
        return {"quadrant": target.quadrant.name}
    return {"point": list(target.point)}


def _candidate_doc(c):
    return {
        "offset": c.semitone_offset,
        "target_tonic": c.target_tonic,
        "profile": c.profile_name,
        "probs_before": list(c.probs_before) if c.probs_before else None,
        "probs_after": list(c.probs_after) if c.probs_after else None,
        "point_after": [c.point_after.x, c.point_after.y] if c.point_after else None,
        "distance": c.distance_to_target,
        "folded_notes": c.folded_notes,
        "status": c.status,
    }


def report_doc(report):
    sp = report.source_point
    return {
        "input": {"melody": report.melody, "detected_key": report.detected_key},
        "config": {
            "seed": report.seed,
            "target": _target_doc(report.target),
            "radius": report.radius,
            "sample_rate_hz": report.sample_rate_hz,
            "key_range": list(report.key_range),
            "profiles": list(report.profiles),
            "source_profile": report.source_profile,
        },
        "baseline": {"probs": list(report.source_probs), "point": [sp.x, sp.y],
                     "distance": report.source_distance},
        "candidates": [_candidate_doc(c) for c in report.candidates],
        "best_index": report.best_index,
    }


def reports_to_json(reports):
    """Versioned JSON document for one or more sweep reports."""
    doc = {"format": REPORT_FORMAT, "version": REPORT_VERSION,
           "reports": [report_doc(r) for r in reports]}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def report_to_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for c in report.candidates:
        before = list(c.probs_before) if c.probs_before else [""] * 4
        after = list(c.probs_after) if c.probs_after else [""] * 4
        point = [c.point_after.x, c.point_after.y] if c.point_after else ["", ""]
        dist = c.distance_to_target if c.distance_to_target is not None else ""
        writer.writerow([c.semitone_offset, c.target_tonic, c.profile_name,
                         *map(_num, before), *map(_num, after), *map(_num, point), _num(dist),
                         c.status])
    return buf.getvalue()


def _num(v):
    return repr(float(v)) if v != "" else ""
