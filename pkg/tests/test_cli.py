import json
import subprocess
import sys

from bvpcomplete.cli import main
from bvpcomplete.model import problem_from_json
from bvpcomplete.presets import preset_names


def read_report(out_dir):
    return json.loads((out_dir / "report.json").read_text())


def strip_timestamp(report):
    report = dict(report)
    report.pop("generated_at", None)
    return report


def test_preset_catalog_lists_known_names(capsys):
    assert main(["preset"]) == 0
    catalog = json.loads(capsys.readouterr().out)
    names = [entry["name"] for entry in catalog]
    assert "ex-n3-cyclic" in names
    assert "th71-nonreal" in names
    assert len(names) == len(preset_names())


def test_classify_weakly_regular_preset(tmp_path):
    out = tmp_path / "run"
    assert main(["classify", "--preset", "ex-n3-cyclic", "--out", str(out)]) == 0
    rep = read_report(out)
    assert rep["regularity"]["verdict"] == "WeaklyRegularOnly"
    assert rep["regularity"]["witness"] is not None
    assert (out / "sectors.csv").exists()


def test_classify_star_preset(tmp_path):
    out = tmp_path / "run"
    assert main(["classify", "--preset", "ex-n3-star", "--out", str(out)]) == 0
    assert read_report(out)["regularity"]["verdict"] == "WeaklyRegularOnly"


def test_spectrum_periodic_window(tmp_path):
    out = tmp_path / "spec"
    code = main(
        [
            "spectrum",
            "--preset",
            "dirac-periodic",
            "--window=-20,20,-2,2",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    rep = read_report(out)
    eigs = rep["spectrum"]["eigenvalues"]
    assert len(eigs) == 7
    assert all(ev["multiplicity"] == 2 for ev in eigs)
    rows = (out / "eigenvalues.csv").read_text().strip().splitlines()
    assert rows[0] == "re,im,multiplicity,residual"
    assert len(rows) == 8


def test_complete_pipeline_writes_residual_table(tmp_path):
    out = tmp_path / "complete"
    code = main(
        [
            "complete",
            "--preset",
            "dirac-dirichlet-q1",
            "--window=-10.5,10.5,-2,2",
            "--n-schedule",
            "1,2,4,6",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    rep = read_report(out)
    assert rep["criteria"]["verdict"] == "predicted-complete (endpoint-coupling)"
    rows = (out / "residuals.csv").read_text().strip().splitlines()
    assert rows[0] == "N,probe_id,residual"
    assert len(rows) == 1 + 4 * 3  # three default probes


def test_witness_pipeline(tmp_path):
    out = tmp_path / "wit"
    # zero-potential mirror pair: the T- certificate applies and is found first
    code = main(["witness", "--preset", "prop512-mirror", "--out", str(out)])
    assert code == 0
    assert read_report(out)["witness_kind"] == "t-minus-defect"
    # coupled mirror pair: only the mirror-symmetric construction applies
    out = tmp_path / "wit-q"
    code = main(["witness", "--preset", "prop512-mirror-q", "--out", str(out)])
    assert code == 0
    rep = read_report(out)
    assert rep["witness_kind"] == "mirror-symmetric-defect"
    assert rep["max_normalized_inner_product"] < 1e-7
    assert rep["witness_residual"] > 0.9
    assert (out / "witness.csv").exists()


def test_asymptote_pipeline(tmp_path):
    out = tmp_path / "asym"
    code = main(
        [
            "asymptote",
            "--preset",
            "dirac-periodic",
            "--direction",
            "1,0",
            "--t-values",
            "10,20,40",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    rep = read_report(out)
    assert rep["asymptotics"]["det_trend_decreasing"]
    assert (out / "asymptote.csv").exists()


def test_roots_pipeline(tmp_path):
    out = tmp_path / "roots"
    code = main(
        [
            "roots",
            "--preset",
            "tminus-degenerate",
            "--window=-7,7,-1,1",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    rep = read_report(out)
    assert rep["chains"]
    assert (out / "chains.csv").exists()


def test_problem_file_round_trip(tmp_path, capsys):
    # export a preset problem, reload it through --problem
    assert main(["preset", "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    from bvpcomplete.model import problem_to_json
    from bvpcomplete.presets import get_preset

    blob = problem_to_json(get_preset("dirac-periodic"))
    path = tmp_path / "problem.json"
    path.write_text(json.dumps(blob))
    out = tmp_path / "out"
    code = main(["classify", "--problem", str(path), "--out", str(out)])
    assert code == 0
    assert read_report(out)["regularity"]["verdict"] == "Regular"
    # the echoed problem in the report parses back to the same instance
    echoed = read_report(out)["problem"]
    back = problem_from_json(echoed)
    assert back.blocks.sizes == (1, 1)


def test_malformed_json_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    assert main(["classify", "--problem", str(bad), "--out", str(tmp_path)]) == 2


def test_invalid_problem_exit_code(tmp_path):
    blob = {
        "blocks": {"sizes": [1, 1], "weights": [[1.0, 0.0], [1.0, 0.0]]},
        "potential": {"variant": "zero"},
        "bc": {
            "C": [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]],
            "D": [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]],
        },
    }
    path = tmp_path / "dup.json"
    path.write_text(json.dumps(blob))
    assert main(["classify", "--problem", str(path), "--out", str(tmp_path)]) == 2


def test_applicability_exit_code(tmp_path):
    assert (
        main(["witness", "--preset", "dirac-periodic", "--out", str(tmp_path)]) == 4
    )


def test_missing_file_exit_code(tmp_path):
    assert (
        main(["classify", "--problem", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
        == 2
    )


def test_deterministic_reports(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert (
            main(
                [
                    "complete",
                    "--preset",
                    "dirac-periodic",
                    "--window=-7,7,-1,1",
                    "--n-schedule",
                    "1,2,4",
                    "--seed",
                    "7",
                    "--out",
                    str(out),
                ]
            )
            == 0
        )
    rep1 = strip_timestamp(read_report(out1))
    rep2 = strip_timestamp(read_report(out2))
    assert json.dumps(rep1, sort_keys=True) == json.dumps(rep2, sort_keys=True)
    assert (out1 / "residuals.csv").read_text() == (out2 / "residuals.csv").read_text()


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "bvpcomplete.cli", "preset"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "ex-n3-cyclic" in proc.stdout


def test_roots_on_degenerate_problem_exit_code(tmp_path):
    assert (
        main(["roots", "--preset", "dirac-dirichlet", "--out", str(tmp_path)]) == 4
    )


def test_complete_with_adjoint_reports_gram_data(tmp_path):
    out = tmp_path / "adj"
    code = main(
        [
            "complete",
            "--preset",
            "dirac-periodic",
            "--window=-7,7,-1,1",
            "--n-schedule",
            "1,2,4",
            "--with-adjoint",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    rep = read_report(out)
    assert rep["minimality"]
    for entry in rep["minimality"]:
        assert entry["sigma_min"] > 1e-6
        assert entry["cross_gram_max"] < 1e-6
