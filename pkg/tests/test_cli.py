import json
import shutil
import subprocess

import pytest

from vorlat.cli import EXIT_FAIL, EXIT_USAGE, main


def run(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = main(argv + ["--out", str(out)])
    return code, (out.read_text() if out.exists() else None)


def test_analyze_is_deterministic(tmp_path):
    code, first = run(["analyze", "--lattice", "A2", "--streak", "100"], tmp_path, "a.json")
    assert code == 0
    _, second = run(["analyze", "--lattice", "A2", "--streak", "100"], tmp_path, "b.json")
    assert first == second
    rep = json.loads(first)
    assert rep["result"]["G"] == "5/108*sqrt(3)"
    assert rep["result"]["volume"] == "1/2*sqrt(3)"
    assert rep["relevant_vectors"]["count"] == 6
    assert rep["faces"]["class_counts"] == [1, 1, 1]
    assert rep["checks"]["volume_certificate"]
    assert rep["checks"]["vertex_search_complete"]


def test_verify_accepts_and_detects_tampering(tmp_path):
    code, text = run(["analyze", "--lattice", "Z3", "--streak", "100"], tmp_path, "z3.json")
    assert code == 0
    good = tmp_path / "z3.json"
    code, summary = run(["verify", str(good), "--samples", "20000"], tmp_path, "v.json")
    assert code == 0 and json.loads(summary)["all_pass"]

    rep = json.loads(text)
    rep["vertices"]["classes"][0]["representative"][0] = "1/3"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(rep))
    code, summary = run(["verify", str(bad), "--samples", "20000"], tmp_path, "v2.json")
    assert code == EXIT_FAIL
    assert "vertex_inequalities" in json.loads(summary)["failed"]

    rep = json.loads(text)
    rep["result"]["G"] = "1/13"
    bad.write_text(json.dumps(rep))
    code, summary = run(["verify", str(bad), "--samples", "20000"], tmp_path, "v3.json")
    assert code == EXIT_FAIL
    assert json.loads(summary)["failed"] == ["result_match"]


@pytest.mark.parametrize(
    "argv",
    [
        ["analyze"],
        ["analyze", "--lattice", "Z2", "--generator-file", "x.json"],
        ["analyze", "--lattice", "Z2", "--eps", "0.5"],
        ["analyze", "--lattice", "nope"],
        ["analyze", "--lattice", "Z2", "--threads", "0"],
        ["analyze", "--lattice", "Z2", "--edge-limit", "-1"],
        ["optimize-family", "--lattice", "Z1", "--offset", "1/2"],
        ["optimize-family", "--lattice", "Z1", "--offset", "1/2", "--a0", "-1"],
        ["mc-estimate", "--lattice", "Z2", "--samples", "0"],
    ],
)
def test_usage_errors(argv, tmp_path, capsys):
    code, _ = run(argv, tmp_path)
    assert code == EXIT_USAGE
    assert capsys.readouterr().err.startswith("error:")


def test_generator_file(tmp_path):
    g = tmp_path / "hex.json"
    g.write_text('{"d": 3, "name": "hex", "generator": [["1", "0"], ["-1/2", "1/2*sqrt(3)"]]}')
    code, text = run(["analyze", "--generator-file", str(g), "--streak", "100"], tmp_path)
    assert code == 0
    assert json.loads(text)["result"]["G"] == "5/108*sqrt(3)"


def test_optimize_family(tmp_path):
    code, text = run(["optimize-family", "--lattice", "Z1", "--offset", "1/2", "--a0", "1", "--streak", "60", "--digits", "15"], tmp_path)
    assert code == 0
    rep = json.loads(text)
    assert rep["optimum"]["a_opt"] == "0.866025403784439"
    assert rep["optimum"]["G_opt"] == "0.080187537387448"
    assert rep["U_over_base_volume"] == {"-1": "-1/192", "1": "1/12", "3": "1/12"}


def test_catalog_and_mc(tmp_path):
    code, text = run(["catalog"], tmp_path, "list.json")
    assert code == 0 and "K12" in json.loads(text)["lattices"]
    code, text = run(["catalog", "--lattice", "A3", "--streak", "100"], tmp_path, "a3.csv")
    assert code == 0
    lines = text.strip().splitlines()
    assert lines[0] == "dim,class_id,num_vertices,num_normals,child_classes"
    # rhombic dodecahedron: two vertex classes, one class each of edges, facets and the cell
    assert len(lines) - 1 == 2 + 1 + 1 + 1
    code, text = run(["mc-estimate", "--lattice", "Z2", "--samples", "50000", "--seed", "3"], tmp_path, "mc.json")
    rep = json.loads(text)
    assert abs(float(rep["G"]) - 1 / 12) < 4 * float(rep["stderr"])


@pytest.mark.skipif(shutil.which("vorlat") is None, reason="console script not installed")
def test_console_script():
    out = subprocess.run(["vorlat", "--help"], capture_output=True, text=True, check=True).stdout
    for verb in ("analyze", "optimize-family", "verify", "catalog", "mc-estimate"):
        assert verb in out
