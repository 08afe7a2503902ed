import json
from pathlib import Path

import pytest

from latent_rt.cli import EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_OK, main


def _write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def _simulate(tmp_path, config_file, name="data.csv", *extra):
    out = tmp_path / name
    assert main(["simulate", "--config", str(config_file), "--out", str(out), *extra]) == EXIT_OK
    return out


def test_schema(capsys):
    assert main(["schema"]) == EXIT_OK
    schema = json.loads(capsys.readouterr().out)
    assert schema["title"] == "RunConfig"
    assert "model" in schema["properties"]


def test_committed_schema_is_current(capsys):
    committed = json.loads((Path(__file__).parent.parent / "docs" / "run_config.schema.json").read_text())
    assert main(["schema"]) == EXIT_OK
    # Regenerate with `latent-rt schema > docs/run_config.schema.json`
    assert json.loads(capsys.readouterr().out) == committed


def test_simulate_writes_data_and_truth(tmp_path, config_file, capsys):
    out = _simulate(tmp_path, config_file)
    summary = json.loads(capsys.readouterr().out)
    assert summary["subjects"] == 12
    assert len(out.read_text(encoding="utf-8").splitlines()) == 12 * 3 + 1
    truth = json.loads((tmp_path / "data.csv.truth.json").read_text(encoding="utf-8"))
    assert truth["a1"] == -1.0
    assert truth["sigma12"] == [[0.1]]


def test_simulate_is_reproducible(tmp_path, config_file):
    first = _simulate(tmp_path, config_file, "a.csv", "--seed", "5")
    second = _simulate(tmp_path, config_file, "b.csv", "--seed", "5")
    other = _simulate(tmp_path, config_file, "c.csv", "--seed", "6")
    assert first.read_bytes() == second.read_bytes()
    assert first.read_bytes() != other.read_bytes()


def test_simulate_without_subjects(tmp_path, config_dict):
    config_dict["model"]["m"] = 0
    out = tmp_path / "empty.csv"
    assert main(["simulate", "--config", _write_config(tmp_path, config_dict), "--out", str(out)]) == EXIT_OK
    assert out.read_text(encoding="utf-8").splitlines() == ["subject,time_index,outcome,y,r_star,crossed,v1_0,v2_0"]


def test_simulate_needs_an_output(config_file, capsys):
    assert main(["simulate", "--config", str(config_file)]) == EXIT_ERROR
    assert "ConfigurationError" in capsys.readouterr().err


def test_loglik(tmp_path, config_file, capsys):
    data = _simulate(tmp_path, config_file)
    capsys.readouterr()
    assert main(["loglik", "--config", str(config_file), "--data", str(data)]) == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result["quadrature_order"] == 8
    assert result["clamp_events"] == 0
    assert result["loglik"] < 0

    assert main(["loglik", "--config", str(config_file), "--data", str(data), "--quad-order", "20"]) == EXIT_OK
    finer = json.loads(capsys.readouterr().out)
    assert finer["quadrature_order"] == 20
    assert finer["loglik"] == pytest.approx(result["loglik"], rel=1e-3)


def test_unordered_boundaries_are_rejected(tmp_path, config_dict, capsys):
    config_dict["params"]["a2"] = -2.0
    path = _write_config(tmp_path, config_dict)
    assert main(["simulate", "--config", path, "--out", str(tmp_path / "x.csv")]) == EXIT_ERROR
    err = capsys.readouterr().err
    assert "params.a2" in err
    assert not (tmp_path / "x.csv").exists()


def test_unknown_config_key(tmp_path, config_dict, capsys):
    config_dict["model"]["subjects"] = 10
    path = _write_config(tmp_path, config_dict)
    assert main(["simulate", "--config", path, "--out", str(tmp_path / "x.csv")]) == EXIT_ERROR
    assert "invalid run config: model.subjects" in capsys.readouterr().err


def test_override_out_of_bounds(tmp_path, config_file, capsys):
    data = _simulate(tmp_path, config_file)
    assert main(["loglik", "--config", str(config_file), "--data", str(data), "--quad-order", "0"]) == EXIT_ERROR
    assert "quadrature.order" in capsys.readouterr().err


def test_malformed_data(tmp_path, config_file, capsys):
    data = _simulate(tmp_path, config_file)
    lines = data.read_text(encoding="utf-8").splitlines()
    fields = lines[4].split(",")
    fields[3] = "1.2.3"
    lines[4] = ",".join(fields)
    data.write_text("\n".join(lines) + "\n", encoding="utf-8")
    assert main(["loglik", "--config", str(config_file), "--data", str(data)]) == EXIT_ERROR
    assert "line 5" in capsys.readouterr().err


def test_missing_data_file(tmp_path, config_file, capsys):
    assert main(["loglik", "--config", str(config_file), "--data", str(tmp_path / "nope.csv")]) == EXIT_ERROR
    assert capsys.readouterr().err


def test_fit_without_convergence_still_writes(tmp_path, config_file):
    data = _simulate(tmp_path, config_file)
    out = tmp_path / "fit.json"
    code = main(["fit", "--config", str(config_file), "--data", str(data), "--out", str(out), "--max-evals", "1"])
    assert code == EXIT_NOT_CONVERGED
    result = json.loads(out.read_text(encoding="utf-8"))
    assert result["converged"] is False
    assert len(result["theta_hat"]) == 8
    assert result["params_hat"]["a1"] < result["params_hat"]["a2"]


def test_fit_from_the_truth_does_not_lose_likelihood(tmp_path, config_file, capsys):
    data = _simulate(tmp_path, config_file)
    capsys.readouterr()
    assert main(["loglik", "--config", str(config_file), "--data", str(data)]) == EXIT_OK
    truth = json.loads(capsys.readouterr().out)["loglik"]
    out = tmp_path / "fit.json"
    code = main(["fit", "--config", str(config_file), "--data", str(data), "--out", str(out),
                 "--init", str(tmp_path / "data.csv.truth.json")])
    assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
    assert json.loads(out.read_text(encoding="utf-8"))["loglik"] >= truth - 1e-8


def test_fit_output_is_independent_of_threads(tmp_path, config_file):
    data = _simulate(tmp_path, config_file)
    outputs = []
    for threads in ("1", "2"):
        out = tmp_path / f"fit{threads}.json"
        main(["fit", "--config", str(config_file), "--data", str(data), "--out", str(out), "--threads", threads])
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_quick_check(capsys):
    assert main(["check", "--level", "quick"]) == EXIT_OK
    reports = json.loads(capsys.readouterr().out)
    assert all(r["passed"] for r in reports)
