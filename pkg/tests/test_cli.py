import subprocess
import sys

import pytest

from symfuse.cli import main

SPEC = """\
experts = A,B
bias = 0.2,0.3
impostor_bias = -0.2,-0.3
noise = 0.15,0.15
quality = coupled,fixed
users = 6
genuine = 8
impostor = 8
"""


@pytest.fixture
def scores(tmp_path):
    (tmp_path / "spec.txt").write_text(SPEC)
    out = tmp_path / "s.csv"
    assert main(["synth", "scores", "--spec", str(tmp_path / "spec.txt"), "--seed", "3",
                 "--out", str(out)]) == 0
    return out


def run(*args, capsys=None):
    code = main([str(a) for a in args])
    return code, capsys.readouterr() if capsys else None


def test_quality_command(tmp_path, capsys):
    img = tmp_path / "p.pgm"
    assert main(["synth", "pattern", "--order", "0", "--size", "64", "--out", str(img)]) == 0
    code, out = run("quality", img, "--map", tmp_path / "m.csv", capsys=capsys)
    assert code == 0 and out.out.startswith("Q=")
    assert 0 < float(out.out.strip()[2:]) <= 1
    assert (tmp_path / "m.csv").read_text().startswith("row,col,s,r,q,interesting")


def test_quality_with_config(tmp_path, capsys):
    img = tmp_path / "p.pgm"
    main(["synth", "pattern", "--order", "1", "--size", "64", "--out", str(img)])
    cfg = tmp_path / "c.cfg"
    cfg.write_text("block_size = 16\ntau_s = 0.2\n")
    code, out = run("quality", img, "--config", cfg, capsys=capsys)
    assert code == 0
    cfg.write_text("nonsense = 1\n")
    assert main(["quality", str(img), "--config", str(cfg)]) == 2


def test_fusion_pipeline(tmp_path, scores, capsys):
    model = tmp_path / "m.txt"
    assert main(["fuse", "train", "--scores", str(scores), "--out", str(model)]) == 0
    for mode in ("bayes", "bayes-adaptive", "sum", "max"):
        out = tmp_path / f"{mode}.csv"
        args = ["fuse", "run", "--scores", str(scores), "--mode", mode, "--out", str(out)]
        if mode.startswith("bayes"):
            args += ["--model", str(model)]
        assert main(args) == 0
        capsys.readouterr()
        assert main(["eval", "eer", "--scores", str(out)]) == 0
        line = capsys.readouterr().out.strip()
        assert line.startswith("EER=") and 0 <= float(line[4:]) <= 0.5
    assert main(["fuse", "run", "--scores", str(scores), "--mode", "bayes",
                 "--out", str(tmp_path / "x.csv")]) == 1


def test_bayes_modes_identical_at_unit_quality(tmp_path, capsys):
    (tmp_path / "spec.txt").write_text(SPEC.replace("coupled,fixed", "fixed,fixed"))
    s = tmp_path / "s.csv"
    main(["synth", "scores", "--spec", str(tmp_path / "spec.txt"), "--out", str(s)])
    main(["fuse", "train", "--scores", str(s), "--out", str(tmp_path / "m")])
    for mode in ("bayes", "bayes-adaptive"):
        main(["fuse", "run", "--model", str(tmp_path / "m"), "--scores", str(s), "--mode", mode,
              "--out", str(tmp_path / f"{mode}.csv")])
    assert (tmp_path / "bayes.csv").read_bytes() == (tmp_path / "bayes-adaptive.csv").read_bytes()


def test_eer_per_expert_and_perfect(tmp_path, scores, capsys):
    code, out = run("eval", "eer", "--scores", scores, capsys=capsys)
    assert code == 0 and out.out.splitlines()[0].startswith("EER[A]=")
    (tmp_path / "spec.txt").write_text("experts=A\nbias=0\nnoise=0\nusers=2\n")
    perfect = tmp_path / "p.csv"
    main(["synth", "scores", "--spec", str(tmp_path / "spec.txt"), "--out", str(perfect)])
    capsys.readouterr()
    code, out = run("eval", "eer", "--scores", perfect, capsys=capsys)
    assert out.out == "EER=0.000000\n"


def test_cascade_command(tmp_path, scores, capsys):
    code, out = run("cascade", "run", "--scores", scores, "--thresholds", "10",
                    "--rule", "max", "--out", tmp_path / "c.csv", capsys=capsys)
    assert code == 0
    lines = out.out.splitlines()
    assert lines[0] == "executions=1.000000"
    assert all(ln.endswith("=1.000000") for ln in lines)
    code, out = run("cascade", "run", "--scores", scores, "--thresholds", "0",
                    "--out", tmp_path / "c.csv", capsys=capsys)
    assert "executions[B]=0.000000" in out.out
    assert main(["cascade", "run", "--scores", str(scores), "--thresholds", "1,0.5",
                 "--out", str(tmp_path / "c.csv")]) == 1
    assert main(["cascade", "run", "--scores", str(scores), "--thresholds", "0.5,1", "--rule", "sum",
                 "--out", str(tmp_path / "c.csv")]) == 3


def test_groups_and_jackknife(tmp_path, scores, capsys):
    code, out = run("eval", "groups", "--scores", scores, "--k", "3", capsys=capsys)
    lines = out.out.splitlines()
    assert code == 0 and lines[0] == "group,n_genuine,n_impostor,eer"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["I", "II", "III"]
    code, out = run("eval", "groups", "--scores", scores, "--k", "30", capsys=capsys)
    assert code == 2
    for mode in ("pooled", "mean"):
        code, out = run("eval", "jackknife", "--scores", scores, "--mode", mode, capsys=capsys)
        assert code == 0 and out.out.startswith("EER=")


def test_error_codes(tmp_path, capsys):
    assert main(["quality", str(tmp_path / "missing.pgm")]) == 2
    bad = tmp_path / "d.pgm"
    bad.write_bytes(b"P5\n2 2\n65535\n" + bytes(8))
    assert main(["quality", str(bad)]) == 2
    assert "depth" in capsys.readouterr().err
    tiny = tmp_path / "t.pgm"
    tiny.write_bytes(b"P5\n3 3\n255\n" + bytes(9))
    assert main(["quality", str(tiny)]) == 3
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["synth", "pattern", "--order", "x", "--out", "o.pgm"])
    assert info.value.code == 1
    assert main(["synth", "pattern", "--order", "-3", "--out", str(tmp_path / "o.pgm")]) == 3


def test_train_needs_labels(tmp_path):
    s = tmp_path / "s.csv"
    s.write_text("expert_id,shot_id,claim_id,score,quality,claim_quality,label\n"
                 + "".join(f"A,s{k},c,0.5,1,1,unknown\n" for k in range(8)))
    assert main(["fuse", "train", "--scores", str(s), "--out", str(tmp_path / "m")]) == 2


def test_module_entry_point_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"p{k}.pgm"
        proc = subprocess.run([sys.executable, "-m", "symfuse", "synth", "pattern", "--order", "1",
                               "--alpha", "0.5", "--size", "48", "--out", str(out)],
                              capture_output=True)
        assert proc.returncode == 0, proc.stderr
        q = subprocess.run([sys.executable, "-m", "symfuse", "quality", str(out)],
                           capture_output=True)
        outs.append((out.read_bytes(), q.stdout))
    assert outs[0] == outs[1]
