import csv
import json
import shutil

import pytest

from conftest import B_MINOR_LINE, melody_from
from emoshift import __version__, emotion
from emoshift.cli import main
from emoshift.midi import read_midi_file, write_midi_file
from emoshift.synth import BUILTIN_PROFILES, render, write_wav_file


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth-corpus", "--n", "6", "--seed", "2", "--bars", "2", "--out", str(root / "corpus")]) == 0
    assert main(["train", "--manifest", str(root / "corpus" / "manifest.csv"), "--out", str(root / "model"),
                 "--epochs", "20"]) == 0
    song = melody_from(B_MINOR_LINE)
    write_midi_file(song, root / "b.mid")
    return root


def test_synth_corpus_layout(workspace, tmp_path):
    files = sorted(p.name for p in (workspace / "corpus").iterdir())
    assert "manifest.csv" in files and len(files) == 6 * 4 + 1
    assert main(["synth-corpus", "--n", "1", "--seed", "0", "--bars", "1", "--out", str(tmp_path / "a")]) == 0
    assert main(["synth-corpus", "--n", "1", "--seed", "0", "--bars", "1", "--out", str(tmp_path / "b")]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert len(names) == 5
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert len(emotion.load_manifest(tmp_path / "a" / "manifest.csv")) == 4


def test_train_outputs(workspace, tmp_path):
    model = workspace / "model" / "model.json"
    assert json.loads(model.read_text())["magic"] == "emoshift-classifier"
    rows = list(csv.DictReader(open(workspace / "model" / "loss.csv")))
    assert float(rows[-1]["train_loss"]) < float(rows[0]["train_loss"])
    # deterministic under the same seed
    assert main(["train", "--manifest", str(workspace / "corpus" / "manifest.csv"), "--out", str(tmp_path),
                 "--epochs", "20"]) == 0
    assert (tmp_path / "model.json").read_bytes() == model.read_bytes()


def test_train_errors(workspace, tmp_path, capsys):
    assert main(["train", "--manifest", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 2
    assert "manifest not found" in capsys.readouterr().err
    rows = [line for line in (workspace / "corpus" / "manifest.csv").read_text().splitlines() if "Q1" in line]
    (tmp_path / "one.csv").write_text("path,quadrant\n" + "\n".join(
        [f"{workspace / 'corpus' / r.split(',')[0]},Q1" for r in rows] * 3) + "\n")
    assert main(["train", "--manifest", str(tmp_path / "one.csv"), "--out", str(tmp_path)]) == 3
    for i, text in enumerate(("file,label\n", "path,quadrant\nx.wav,Q1,extra\n")):
        (tmp_path / f"bad{i}.csv").write_text(text)
        assert main(["train", "--manifest", str(tmp_path / f"bad{i}.csv"), "--out", str(tmp_path)]) == 2


def test_eval(workspace, tmp_path, capsys):
    rc = main(["eval", "--manifest", str(workspace / "corpus" / "manifest.csv"),
               "--model", str(workspace / "model" / "model.json"), "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "accuracy:" in out and "Q4" in out
    acc = float((tmp_path / "accuracy.txt").read_text())
    rows = list(csv.reader(open(tmp_path / "confusion.csv")))
    assert rows[0] == ["true", "Q1", "Q2", "Q3", "Q4"]
    counts = [[int(v) for v in r[1:]] for r in rows[1:]]
    assert sum(map(sum, counts)) == 24
    assert acc == pytest.approx(sum(counts[i][i] for i in range(4)) / 24)


def test_eval_valence_arousal_manifest(workspace, tmp_path, capsys):
    lines = (workspace / "corpus" / "manifest.csv").read_text().splitlines()[1:]
    va = {"Q1": "8,8", "Q2": "2,8", "Q3": "2,2", "Q4": "8,2"}
    text = "path,valence,arousal\n" + "\n".join(
        f"{workspace / 'corpus' / p},{va[q]}" for p, q in (ln.split(",") for ln in lines)) + "\n"
    (tmp_path / "va.csv").write_text(text)
    rc_va = main(["eval", "--manifest", str(tmp_path / "va.csv"),
                  "--model", str(workspace / "model" / "model.json")])
    out_va = capsys.readouterr().out
    main(["eval", "--manifest", str(workspace / "corpus" / "manifest.csv"),
          "--model", str(workspace / "model" / "model.json")])
    assert rc_va == 0 and out_va == capsys.readouterr().out


def test_eval_bad_model(workspace, tmp_path):
    (tmp_path / "m.json").write_text("{}")
    args = ["eval", "--manifest", str(workspace / "corpus" / "manifest.csv")]
    assert main(args + ["--model", str(tmp_path / "m.json")]) == 3
    assert main(args + ["--model", str(tmp_path / "none.json")]) == 2


def test_analyze_wav_and_midi(workspace, tmp_path):
    model = str(workspace / "model" / "model.json")
    song = read_midi_file(workspace / "b.mid")
    write_wav_file(render(song, None, BUILTIN_PROFILES["piano-like"], None), tmp_path / "b.wav")
    assert main(["analyze", str(tmp_path / "b.wav"), "--model", model, "--out", str(tmp_path / "w")]) == 0
    assert main(["analyze", str(workspace / "b.mid"), "--model", model, "--out", str(tmp_path / "m")]) == 0
    wav_doc = json.loads((tmp_path / "w" / "analysis.json").read_text())
    midi_doc = json.loads((tmp_path / "m" / "analysis.json").read_text())
    # the WAV is the MIDI rendered with the same profile, up to 16-bit quantisation
    assert wav_doc["quadrant"] == midi_doc["quadrant"]
    assert wav_doc["probs"] == pytest.approx(midi_doc["probs"], abs=1e-3)
    assert (tmp_path / "m" / "analysis.svg").read_text().startswith("<?xml")
    main(["analyze", str(workspace / "b.mid"), "--model", model, "--out", str(tmp_path / "m2")])
    assert (tmp_path / "m" / "analysis.svg").read_bytes() == (tmp_path / "m2" / "analysis.svg").read_bytes()


def test_analyze_errors(workspace, tmp_path):
    model = str(workspace / "model" / "model.json")
    (tmp_path / "bad.wav").write_bytes(b"RIFF\x00\x00\x00\x00WAVEjunk")
    assert main(["analyze", str(tmp_path / "bad.wav"), "--model", model, "--out", str(tmp_path)]) == 2
    assert main(["analyze", str(tmp_path / "none.wav"), "--model", model, "--out", str(tmp_path)]) == 2
    (tmp_path / "bad.mid").write_bytes(b"MThd")
    assert main(["analyze", str(tmp_path / "bad.mid"), "--model", model, "--out", str(tmp_path)]) == 2


def test_transform(workspace, tmp_path, capsys):
    model = str(workspace / "model" / "model.json")
    args = ["transform", str(workspace / "b.mid"), "--model", model, "--target", "Q1",
            "--low", "C4", "--high", "E4", "--workers", "1", "--out", str(tmp_path)]
    assert main(args) == 0
    for name in ("best.mid", "best.wav", "report.json", "report.csv", "circumplex.svg"):
        assert (tmp_path / name).exists(), name
    doc = json.loads((tmp_path / "report.json").read_text())
    (rep,) = doc["reports"]
    assert len(rep["candidates"]) == 5 * 4
    best = rep["candidates"][rep["best_index"]]
    assert min(c["distance"] for c in rep["candidates"]) == best["distance"]
    assert len(read_midi_file(tmp_path / "best.mid").tracks) == 2
    assert "best" in capsys.readouterr().out


def test_transform_explicit_point_and_bad_target(workspace, tmp_path):
    model = str(workspace / "model" / "model.json")
    base = ["transform", str(workspace / "b.mid"), "--model", model, "--low", "C4", "--high", "C4",
            "--profiles", "chiptune", "--workers", "1", "--out", str(tmp_path)]
    assert main(base + ["--target", "0.0,0.0"]) == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["reports"][0]["config"]["target"] == {"point": [0.0, 0.0]}
    assert doc["reports"][0]["config"]["source_profile"] == "chiptune"
    assert main(base + ["--target", "elated"]) == 2
    assert main(base + ["--target", "2,2"]) == 2
    assert main(base[:-6] + ["--profiles", "kazoo", "--target", "Q3", "--out", str(tmp_path)]) == 2


def test_sweep_two_melodies_and_workers(workspace, tmp_path):
    model = str(workspace / "model" / "model.json")
    shutil.copy(workspace / "b.mid", tmp_path / "other.mid")
    common = [str(workspace / "b.mid"), str(tmp_path / "other.mid"), "--model", model, "--target", "sad",
              "--low", "A3", "--high", "B3"]
    assert main(["sweep", *common, "--workers", "1", "--out", str(tmp_path / "w1")]) == 0
    assert main(["sweep", *common, "--workers", "2", "--out", str(tmp_path / "w2")]) == 0
    for name in ("sweep.json", "b.csv", "other.csv"):
        assert (tmp_path / "w1" / name).read_bytes() == (tmp_path / "w2" / name).read_bytes()
    doc = json.loads((tmp_path / "w1" / "sweep.json").read_text())
    assert sum(len(r["candidates"]) for r in doc["reports"]) == 2 * 3 * 4


def test_profile_file(workspace, tmp_path):
    (tmp_path / "p.ini").write_text("[bell]\nwaveform = sine\nharmonics = 1 0.3\nadsr = 0 0.5 0 0.3\ngain = 0.5\n")
    model = str(workspace / "model" / "model.json")
    rc = main(["sweep", str(workspace / "b.mid"), "--model", model, "--target", "Q4", "--low", "60",
               "--high", "60", "--profiles", "bell,organ-like", "--profile-file", str(tmp_path / "p.ini"),
               "--workers", "1", "--out", str(tmp_path)])
    assert rc == 0
    doc = json.loads((tmp_path / "sweep.json").read_text())
    assert doc["reports"][0]["config"]["profiles"] == ["bell", "organ-like"]


def test_usage_errors():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["synth-corpus"])
    assert exc.value.code == 2


def test_help_lists_flags(capsys):
    with pytest.raises(SystemExit):
        main(["sweep", "--help"])
    text = capsys.readouterr().out
    for flag in ("--low", "--high", "--profiles", "--workers", "--seed", "--radius", "--sample-rate",
                 "--target", "--model"):
        assert flag in text
    assert __version__
