import io
import json
import os
import subprocess
import sys

import pytest

from pesf import cli, corpus, stego
from pesf.corpus import PeSpec, SectionSpec

ENV = {"PESF_PASSWORD": "hunter2"}


@pytest.fixture
def workdir(tmp_path, simple_cover):
    (tmp_path / "a.exe").write_bytes(simple_cover)
    (tmp_path / "s.bin").write_bytes(b"top secret\n" * 10)
    return tmp_path


def run(*argv, env=ENV):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run([str(a) for a in argv], env, out, err)
    return code, out.getvalue(), err.getvalue()


def hide(d, *extra, env=ENV):
    return run("hide", "--cover", d / "a.exe", "--secret", d / "s.bin", "--out", d / "b.exe",
               "--iterations", "100", *extra, env=env)


def test_round_trip(workdir):
    code, out, _ = hide(workdir)
    assert code == 0, out
    assert (workdir / "b.exe").stat().st_size == (workdir / "a.exe").stat().st_size
    code, _, _ = run("extract", "--stego", workdir / "b.exe", "--out", workdir / "r.bin")
    assert code == 0
    assert (workdir / "r.bin").read_bytes() == (workdir / "s.bin").read_bytes()


def test_distortion_mode(workdir):
    assert hide(workdir)[0] == 0
    code, _, _ = run("extract", "--stego", workdir / "b.exe", "--original", workdir / "a.exe",
                     "--out", workdir / "r.bin")
    assert code == 0
    assert (workdir / "r.bin").read_bytes() == (workdir / "s.bin").read_bytes()


def test_oversize_secret(workdir):
    (workdir / "s.bin").write_bytes(bytes(100_000))
    code, _, err = hide(workdir)
    assert code == 3
    assert "slack" in err
    assert not (workdir / "b.exe").exists()
    assert [p.name for p in workdir.iterdir()] and not any(p.name.endswith(".tmp") for p in workdir.iterdir())


def test_wrong_password(workdir):
    assert hide(workdir)[0] == 0
    code, _, _ = run("extract", "--stego", workdir / "b.exe", "--out", workdir / "r.bin",
                     env={"PESF_PASSWORD": "nope"})
    assert code == 4
    assert not (workdir / "r.bin").exists()


def test_extract_clean_file(workdir):
    assert run("extract", "--stego", workdir / "a.exe", "--out", workdir / "r.bin")[0] == 4


def test_password_flag_and_precedence(workdir):
    assert hide(workdir, "--password", "flagpw", env={})[0] == 0
    assert run("extract", "--stego", workdir / "b.exe", "--out", workdir / "r.bin",
               "--password", "flagpw", env={})[0] == 0
    # env is ignored when the flag is present
    assert run("extract", "--stego", workdir / "b.exe", "--out", workdir / "r.bin",
               "--password", "flagpw", env={"PESF_PASSWORD": "other"})[0] == 0


def test_missing_password_is_usage_error(workdir, monkeypatch):
    monkeypatch.setattr(sys, "stdin", io.StringIO())
    assert hide(workdir, env={})[0] == 1


def test_usage_errors(workdir):
    assert run()[0] == 1
    assert run("hide", "--cover", workdir / "a.exe")[0] == 1
    assert run("bogus")[0] == 1
    assert run("hide", "--cover", workdir / "missing.exe", "--secret", workdir / "s.bin",
               "--out", workdir / "b.exe")[0] == 1
    assert run("hide", "--cover", workdir / "a.exe", "--secret", workdir / "s.bin",
               "--out", workdir / "b.exe", "--key-bits", "100")[0] == 1
    assert run("hide", "--cover", workdir / "a.exe", "--secret", workdir / "s.bin",
               "--out", workdir / "b.exe", "--iterations", "0")[0] == 1


def test_parse_error(workdir):
    (workdir / "junk.exe").write_bytes(b"not a pe at all")
    assert run("hide", "--cover", workdir / "junk.exe", "--secret", workdir / "s.bin",
               "--out", workdir / "b.exe")[0] == 2
    assert run("verify", workdir / "junk.exe")[0] == 2
    assert run("inspect", workdir / "junk.exe")[0] == 2


def test_verify(workdir, simple_cover):
    assert run("verify", workdir / "a.exe")[0] == 0
    (workdir / "cut.exe").write_bytes(simple_cover[:-1])
    code, out, _ = run("verify", workdir / "cut.exe")
    assert code == 2 and "SectionOutOfBounds" in out


def test_inspect_text(workdir):
    code, out, _ = run("inspect", workdir / "a.exe")
    assert code == 0
    assert "capacity:" in out and "SectionTail [.rsrc]" in out and "validation: ok" in out


def test_inspect_json(workdir):
    code, out, _ = run("inspect", "--json", workdir / "a.exe")
    assert code == 0
    doc = json.loads(out)
    assert doc["container_detected"] is False
    assert doc["valid"] is True and doc["violations"] == []
    assert doc["capacity"] == sum(r["length"] for r in doc["regions"])
    for r in doc["regions"]:
        assert set(r) == {"offset", "length", "kind", "section"}
    hide(workdir)
    assert json.loads(run("inspect", "--json", workdir / "b.exe")[1])["container_detected"] is True


def test_prefer_section_option(workdir):
    assert hide(workdir, "--prefer-section", ".text")[0] == 0
    assert run("extract", "--stego", workdir / "b.exe", "--out", workdir / "r.bin")[0] == 4
    assert run("extract", "--stego", workdir / "b.exe", "--out", workdir / "r.bin",
               "--prefer-section", ".text")[0] == 0


def test_seeded_output_is_reproducible(workdir):
    hide(workdir, "--insecure-seed", "7")
    first = (workdir / "b.exe").read_bytes()
    hide(workdir, "--insecure-seed", "7")
    assert (workdir / "b.exe").read_bytes() == first
    hide(workdir)
    assert (workdir / "b.exe").read_bytes() != first


def test_atomic_write_cleans_up(tmp_path, monkeypatch):
    target = tmp_path / "out.bin"
    target.write_bytes(b"old")

    def boom(*a):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        cli.write_atomic(target, b"new")
    assert target.read_bytes() == b"old"
    assert [p.name for p in tmp_path.iterdir()] == ["out.bin"]


def test_module_entry_point(workdir):
    proc = subprocess.run([sys.executable, "-m", "pesf", "verify", str(workdir / "a.exe")],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "ok" in proc.stdout
