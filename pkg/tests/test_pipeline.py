import csv
import io
import json

import numpy as np
import pytest

from emoshift import pipeline
from emoshift.circumplex import CircumplexPoint, EmotionTarget, Quadrant, distance, map_to_plane
from emoshift.corpus import q1_melody
from emoshift.emotion import QuadrantProbs
from emoshift.midi import MidiSong, detect_key
from emoshift.pipeline import (CSV_COLUMNS, SweepReport, TransformationCandidate, baseline,
                               report_to_csv, reports_to_json, select_best, sweep, transform_once)
from emoshift.synth import BUILTIN_PROFILES, InstrumentProfile

Q3 = EmotionTarget(Quadrant.Q3)
UNIFORM = QuadrantProbs(0.25, 0.25, 0.25, 0.25)


def _report(cands):
    return SweepReport("m", "C major", 0, Q3, 1.0, 16000, ("C0", "B8"), ("a", "b"), "a", UNIFORM,
                       tuple(cands))


def _cand(offset, profile, dist, status="ok"):
    return TransformationCandidate(offset, "C4", profile, UNIFORM, UNIFORM if status == "ok" else None,
                                   CircumplexPoint(0, 0), dist, status)


def test_select_best_argmin():
    rep = _report([_cand(0, "a", 0.4), _cand(1, "a", 0.1), _cand(2, "a", 0.9)])
    assert select_best(rep) is rep.candidates[1]


def test_select_best_tie_rules():
    rep = _report([_cand(5, "a", 0.3), _cand(-3, "a", 0.3)])
    assert select_best(rep).semitone_offset == -3
    rep = _report([_cand(2, "b", 0.3), _cand(-2, "a", 0.3), _cand(2, "a", 0.3)])
    assert (select_best(rep).semitone_offset, select_best(rep).profile_name) == (-2, "a")


def test_select_best_skips_errors():
    rep = _report([_cand(0, "a", None, "error: boom"), _cand(1, "a", 0.8)])
    assert select_best(rep).semitone_offset == 1
    with pytest.raises(ValueError):
        select_best(_report([_cand(0, "a", None, "error: boom")]))


def test_select_best_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 30))
        cands = [_cand(int(rng.integers(-60, 60)), str(rng.choice(["a", "b", "c"])),
                       float(rng.choice([0.1, 0.2, rng.uniform(0, 2)]))) for _ in range(n)]
        best = select_best(_report(cands))
        assert best.distance_to_target == min(c.distance_to_target for c in cands)
        assert all(best.distance_to_target <= c.distance_to_target for c in cands)


def test_baseline_is_deterministic(trained_model, b_minor_song):
    prof = BUILTIN_PROFILES["piano-like"]
    assert baseline(b_minor_song, prof, trained_model) == baseline(b_minor_song, prof, trained_model)


def test_silent_melody_rejected(trained_model):
    with pytest.raises(ValueError):
        baseline(MidiSong(480, 500000, []), BUILTIN_PROFILES["piano-like"], trained_model)


def test_offset_zero_without_accompaniment_is_baseline(trained_model, b_minor_song):
    prof = BUILTIN_PROFILES["organ-like"]
    probs, clip, combined = transform_once(b_minor_song, 0, prof, trained_model, accompany=False)
    assert probs == baseline(b_minor_song, prof, trained_model)
    assert combined == b_minor_song


def test_b_minor_down_two_yields_a_minor(trained_model, b_minor_song):
    probs, clip, combined = transform_once(b_minor_song, -2, BUILTIN_PROFILES["piano-like"],
                                           trained_model, seed=4)
    key = detect_key(combined)
    assert (key.tonic_pc, key.mode) == (9, "minor")
    assert len(combined.tracks) == 2
    again = transform_once(b_minor_song, -2, BUILTIN_PROFILES["piano-like"], trained_model, seed=4)
    assert again[0] == probs and again[1] == clip


def test_chiptune_q1_baseline_is_happy(trained_model):
    for seed in range(5):
        probs = baseline(q1_melody(seed), BUILTIN_PROFILES["chiptune"], trained_model)
        assert int(np.argmax(probs)) == 0, (seed, probs)


def test_singleton_sweep(trained_model, b_minor_song):
    rep = sweep(b_minor_song, (60, 60), [BUILTIN_PROFILES["piano-like"]], trained_model, Q3, seed=1)
    assert len(rep.candidates) == 1
    assert rep.best_index == 0
    c = rep.best
    assert c.target_tonic == "C4" and c.semitone_offset == 60 - 71
    assert c.probs_before == rep.source_probs
    assert c.distance_to_target == pytest.approx(distance(map_to_plane(c.probs_after), Q3))


def test_sweep_shape_and_order(trained_model, b_minor_song):
    profiles = [BUILTIN_PROFILES[n] for n in ("strings-like", "chiptune")]
    rep = sweep(b_minor_song, (57, 62), profiles, trained_model, Q3, seed=2)
    assert len(rep.candidates) == 6 * 2
    keys = [(c.semitone_offset, c.profile_name) for c in rep.candidates]
    assert keys == sorted(keys)
    assert rep.profiles == ("chiptune", "strings-like")
    assert rep.source_profile == "chiptune"
    for c in rep.candidates:
        assert c.ok
        assert c.probs_before == baseline(b_minor_song, BUILTIN_PROFILES[c.profile_name], trained_model)
        assert c.distance_to_target == pytest.approx(distance(c.point_after, Q3))
    assert rep.best.distance_to_target == min(c.distance_to_target for c in rep.candidates)


def test_workers_do_not_change_bytes(trained_model, b_minor_song):
    profiles = list(BUILTIN_PROFILES.values())
    one = sweep(b_minor_song, (48, 51), profiles, trained_model, Q3, seed=3, workers=1)
    two = sweep(b_minor_song, (48, 51), profiles, trained_model, Q3, seed=3, workers=2)
    assert reports_to_json([one]) == reports_to_json([two])
    assert report_to_csv(one) == report_to_csv(two)


def test_failures_become_error_rows(trained_model, b_minor_song, monkeypatch):
    real = pipeline.transform_once

    def flaky(melody, offset, profile, *args, **kwargs):
        if offset == 62 - 71:
            raise RuntimeError("synthetic failure")
        return real(melody, offset, profile, *args, **kwargs)

    monkeypatch.setattr(pipeline, "transform_once", flaky)
    rep = sweep(b_minor_song, (60, 63), [BUILTIN_PROFILES["piano-like"]], trained_model, Q3, workers=1)
    assert len(rep.candidates) == 4
    bad = [c for c in rep.candidates if not c.ok]
    assert len(bad) == 1 and bad[0].semitone_offset == -9
    assert "synthetic failure" in bad[0].status
    assert rep.best.ok
    rows = list(csv.DictReader(io.StringIO(report_to_csv(rep))))
    assert [r["status"] for r in rows].count("ok") == 3
    assert rows[2]["p1_after"] == "" and rows[2]["status"].startswith("error")


def test_sweep_argument_errors(trained_model, b_minor_song):
    prof = BUILTIN_PROFILES["piano-like"]
    with pytest.raises(ValueError):
        sweep(b_minor_song, (60, 61), [], trained_model, Q3)
    with pytest.raises(ValueError):
        sweep(b_minor_song, (60, 61), [prof, prof], trained_model, Q3)
    with pytest.raises(ValueError):
        sweep(b_minor_song, (61, 60), [prof], trained_model, Q3)
    with pytest.raises(ValueError):
        sweep(b_minor_song, (60, 61), [prof], trained_model, Q3, source_profile="chiptune")


def test_report_formats(trained_model, b_minor_song):
    custom = InstrumentProfile("custom", "triangle", (1.0, 0.5), (0.01, 0.1, 0.8, 0.1), 0.6)
    rep = sweep(b_minor_song, (59, 60), [custom, BUILTIN_PROFILES["piano-like"]], trained_model,
                EmotionTarget(point=(-0.2, -0.3)), seed=9, melody_name="b.mid")
    doc = json.loads(reports_to_json([rep]))
    assert doc["format"] == "emoshift-sweep" and doc["version"] == 1
    (r,) = doc["reports"]
    assert r["input"] == {"melody": "b.mid", "detected_key": "B minor"}
    assert r["config"]["target"] == {"point": [-0.2, -0.3]}
    assert r["config"]["source_profile"] == "piano-like"
    assert len(r["candidates"]) == 4 and r["best_index"] == rep.best_index
    rows = list(csv.reader(io.StringIO(report_to_csv(rep))))
    assert rows[0] == CSV_COLUMNS
    assert len(rows) == 5
    first = dict(zip(CSV_COLUMNS, rows[1]))
    assert float(first["distance"]) == rep.candidates[0].distance_to_target
    assert sum(float(first[f"p{i}_after"]) for i in range(1, 5)) == pytest.approx(1.0)
