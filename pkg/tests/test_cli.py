import json

import pytest

import normloc as nl
from normloc.cli import main


def _space_file(tmp_path, kind="cycle", n=30, name="sp.json", extra=()):
    path = tmp_path / name
    argv = ["space", "gen", "--kind", kind, "--n", str(n), "--out", str(path)]
    argv.extend(extra)
    assert main(argv) == 0
    return str(path)


def test_space_gen_families(tmp_path, capsys):
    path = tmp_path / "grid.json"
    code = main(
        ["space", "gen", "--kind", "grid", "--rows", "3", "--cols", "4",
         "--out", str(path)]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "grid_3x4" in out and "n=12" in out
    sp = nl.load_space(str(path))
    assert sp.n == 12

    tree = tmp_path / "tree.json"
    assert main(
        ["space", "gen", "--kind", "binary-tree", "--depth", "3",
         "--out", str(tree)]
    ) == 0
    assert nl.load_space(str(tree)).n == 15

    reg = tmp_path / "reg.json"
    assert main(
        ["space", "gen", "--kind", "random-regular", "--n", "10",
         "--degree", "3", "--seed", "7", "--out", str(reg)]
    ) == 0
    assert nl.load_space(str(reg)).n == 10


def test_space_gen_usage_errors(tmp_path, capsys):
    out = str(tmp_path / "x.json")
    # missing a per-kind flag
    assert main(["space", "gen", "--kind", "grid", "--out", out]) == 2
    # random-regular without a seed
    assert main(
        ["space", "gen", "--kind", "random-regular", "--n", "8",
         "--degree", "3", "--out", out]
    ) == 2
    capsys.readouterr()
    # unknown kind is rejected by the parser itself
    with pytest.raises(SystemExit) as exc:
        main(["space", "gen", "--kind", "torus", "--out", out])
    assert exc.value.code == 2
    capsys.readouterr()


def test_space_gen_invalid_params_exit_3(tmp_path):
    out = str(tmp_path / "x.json")
    assert main(["space", "gen", "--kind", "cycle", "--n", "2", "--out", out]) == 3


def test_space_validate_ok(tmp_path, capsys):
    path = _space_file(tmp_path)
    capsys.readouterr()
    assert main(["space", "validate", "--in", path]) == 0
    assert capsys.readouterr().out.startswith("ok:")


def test_space_validate_flags_broken_metric(tmp_path, capsys):
    sp = nl.generate_family("cycle", {"n": 5})
    doc = nl.space_to_json(sp)
    doc["dist"][0][1] = 9  # break symmetry
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["space", "validate", "--in", str(bad)]) == 3
    out = capsys.readouterr().out
    assert "symmetry:" in out or "triangle:" in out


def test_missing_and_malformed_inputs(tmp_path):
    assert main(["space", "validate", "--in", str(tmp_path / "no.json")]) == 3
    junk = tmp_path / "junk.json"
    junk.write_text("{not json")
    assert main(["space", "validate", "--in", str(junk)]) == 3


def test_threads_flag(tmp_path):
    path = tmp_path / "c.json"
    base = ["space", "gen", "--kind", "cycle", "--n", "6", "--out", str(path)]
    assert main(base + ["--threads", "0"]) == 2
    assert main(base + ["--threads", "2"]) == 0


def test_onl_profile_deterministic_outputs(tmp_path, capsys):
    path = _space_file(tmp_path, n=12)
    capsys.readouterr()
    args = [
        "onl", "profile", "--space", path, "--band-radius", "1",
        "--loc-radius", "2", "--samples", "4", "--budget", "10",
        "--certificate", "ball", "--include-adjacency", "--seed", "3",
    ]
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(args + ["--out", a]) == 0
    first = capsys.readouterr().out
    assert main(args + ["--out", b]) == 0
    second = capsys.readouterr().out
    assert first == second
    for suffix in (".json", ".csv"):
        with open(a + suffix, "rb") as fa, open(b + suffix, "rb") as fb:
            assert fa.read() == fb.read()
    doc = json.loads(open(a + ".json").read())
    assert doc["consistent"] is True
    with open(a + ".csv") as fh:
        lines = fh.read().splitlines()
    assert lines[0].split(",") == list(nl.localization.CSV_HEADER)
    assert len(lines) == 5


def test_onl_profile_bad_radii_exit_3(tmp_path):
    path = _space_file(tmp_path, n=12)
    assert main(
        ["onl", "profile", "--space", path, "--band-radius", "3",
         "--loc-radius", "1", "--samples", "2", "--seed", "0",
         "--out", str(tmp_path / "p")]
    ) == 3


def test_cert_build_and_check_all_forms(tmp_path, capsys):
    path = _space_file(tmp_path)
    for form in ("subset", "vector", "kernel"):
        out = str(tmp_path / f"{form}.json")
        assert main(
            ["cert", "build", "--space", path, "--kind", "ball",
             "--radius", "3", "--form", form, "--out", out]
        ) == 0
        capsys.readouterr()
        assert main(["cert", "check", "--in", out]) == 0
        text = capsys.readouterr().out
        assert f"form: {form}" in text
        assert "verdict: pass" in text


def test_cert_check_reports_exact_epsilon(tmp_path, capsys):
    path = _space_file(tmp_path, n=60, name="c60.json")
    out = str(tmp_path / "ball.json")
    assert main(
        ["cert", "build", "--space", path, "--kind", "ball",
         "--radius", "10", "--form", "subset", "--out", out]
    ) == 0
    capsys.readouterr()
    assert main(["cert", "check", "--in", out, "--band-radius", "1"]) == 0
    text = capsys.readouterr().out
    assert "kappa: 3" in text
    assert "epsilon_exact: 1/7" in text
    assert "vacuous: False" in text


def test_cert_check_tampered_kernel_exit_4(tmp_path, capsys):
    sp = nl.generate_family("cycle", {"n": 12})
    kernel = nl.vector_to_kernel(
        nl.subset_to_vector(nl.ball_certificate(sp, 2))
    )
    doc = nl.certificate_to_json(kernel)
    # overwrite a symmetric off-diagonal pair with 2.0: stays Hermitian
    # with unit diagonal but the 2x2 minor goes indefinite
    entries = [e for e in doc["entries"] if {e[0], e[1]} != {0, 1}]
    entries += [[0, 1, 2.0, 0.0], [1, 0, 2.0, 0.0]]
    doc["entries"] = entries
    bad = tmp_path / "bad_kernel.json"
    bad.write_text(json.dumps(doc))
    assert main(["cert", "check", "--in", str(bad)]) == 4
    text = capsys.readouterr().out
    assert "psd_ok: False" in text
    assert "verdict: fail" in text


def test_cert_build_tree_ray_on_cycle_exit_3(tmp_path):
    path = _space_file(tmp_path, n=12)
    assert main(
        ["cert", "build", "--space", path, "--kind", "tree-ray",
         "--length", "2", "--out", str(tmp_path / "t.json")]
    ) == 3


def test_equiv_run_deterministic(tmp_path, capsys):
    path = _space_file(tmp_path)
    args = [
        "equiv", "run", "--space", path, "--band-radius", "1",
        "--loc-radius", "5", "--samples", "4", "--profile-samples", "3",
        "--budget", "10", "--seed", "0",
    ]
    a, b = str(tmp_path / "ea"), str(tmp_path / "eb")
    assert main(args + ["--out", a]) == 0
    capsys.readouterr()
    assert main(args + ["--out", b]) == 0
    capsys.readouterr()
    for suffix in (".json", ".csv"):
        with open(a + suffix, "rb") as fa, open(b + suffix, "rb") as fb:
            assert fa.read() == fb.read()
    doc = json.loads(open(a + ".json").read())
    assert doc["epsilon"]["epsilon_exact"] == "3/11"
    assert doc["kernel_checks"]["matches_gram"] is True


def test_equiv_run_certificate_file_radius_mismatch(tmp_path):
    path = _space_file(tmp_path)
    cert_path = str(tmp_path / "cert.json")
    assert main(
        ["cert", "build", "--space", path, "--kind", "ball", "--radius", "3",
         "--form", "vector", "--out", cert_path]
    ) == 0
    assert main(
        ["equiv", "run", "--space", path, "--band-radius", "1",
         "--loc-radius", "5", "--certificate", cert_path, "--samples", "2",
         "--profile-samples", "2", "--budget", "5", "--seed", "0",
         "--out", str(tmp_path / "e")]
    ) == 3


def test_cb_check_deterministic_and_floor(tmp_path, capsys):
    path = _space_file(tmp_path, n=6, name="c6.json")
    args = [
        "cb", "check", "--space", path, "--band-radius", "1",
        "--loc-radius", "2", "--amplification", "2", "--samples", "6",
        "--seed", "0",
    ]
    a, b = str(tmp_path / "cb_a.json"), str(tmp_path / "cb_b.json")
    assert main(args + ["--out", a]) == 0
    capsys.readouterr()
    assert main(args + ["--out", b]) == 0
    capsys.readouterr()
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()
    doc = json.loads(open(a).read())
    assert doc["consistent"] is True
    # an unreachable floor turns the same data into a verification failure
    assert main(
        args + ["--out", str(tmp_path / "cb_c.json"), "--fraction-floor", "1.1"]
    ) == 4
    capsys.readouterr()
