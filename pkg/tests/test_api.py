import pytest
from fastapi.testclient import TestClient

from latent_rt import __version__
from latent_rt.core.config import settings
from latent_rt.main import app
from latent_rt.schemas.models import RunConfig
from latent_rt.services.runner import WorkflowRunner

client = TestClient(app)


@pytest.fixture
def data_csv(tmp_path, config_dict):
    _, path, _ = WorkflowRunner(RunConfig.model_validate(config_dict)).simulate(tmp_path / "data.csv")
    return path.read_text(encoding="utf-8")


def test_health():
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok", "version": __version__}


def test_loglik(config_dict, data_csv):
    response = client.post("/api/v1/loglik", json={"config": config_dict, "data_csv": data_csv})
    assert response.status_code == 200
    body = response.json()
    assert body["quadrature_order"] == 8
    assert body["clamp_events"] == 0
    assert body["loglik"] < 0


def test_unconverged_fit_is_still_a_result(config_dict, data_csv):
    config_dict["optimizer"]["max_evals"] = 1
    response = client.post("/api/v1/fit", json={"config": config_dict, "data_csv": data_csv})
    assert response.status_code == 200
    body = response.json()
    assert body["converged"] is False
    assert len(body["theta_hat"]) == 8


def test_fit_from_given_start(config_dict, data_csv):
    init = dict(config_dict["params"])
    response = client.post("/api/v1/fit", json={"config": config_dict, "data_csv": data_csv, "init": init})
    assert response.status_code == 200
    assert response.json()["n_evals"] >= 1


def test_invalid_config_is_unprocessable(config_dict, data_csv):
    config_dict["params"]["a2"] = -3.0
    response = client.post("/api/v1/loglik", json={"config": config_dict, "data_csv": data_csv})
    assert response.status_code == 422


def test_data_that_does_not_fit_the_model(config_dict, data_csv):
    config_dict["model"]["n"] = 5
    response = client.post("/api/v1/loglik", json={"config": config_dict, "data_csv": data_csv})
    assert response.status_code == 422
    assert response.json()["detail"].startswith("ConfigurationError")


def test_token_is_enforced_when_configured(monkeypatch, config_dict, data_csv):
    monkeypatch.setattr(settings, "api_bearer_token", "s3cret")
    payload = {"config": config_dict, "data_csv": data_csv}
    assert client.post("/api/v1/loglik", json=payload).status_code == 403
    wrong = client.post("/api/v1/loglik", json=payload, headers={"Authorization": "Bearer nope"})
    assert wrong.status_code == 403
    right = client.post("/api/v1/loglik", json=payload, headers={"Authorization": "Bearer s3cret"})
    assert right.status_code == 200


def test_quick_check():
    response = client.get("/api/v1/check", params={"level": "quick"})
    assert response.status_code == 200
    assert all(report["passed"] for report in response.json())


def test_unknown_check_level():
    assert client.get("/api/v1/check", params={"level": "thorough"}).status_code == 422
