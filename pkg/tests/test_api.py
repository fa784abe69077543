import json

import pytest
from fastapi.testclient import TestClient

from app.main import app


@pytest.fixture
def client() -> TestClient:
    return TestClient(app)


def test_health(client) -> None:
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"


def test_validate(client, genus2_graph) -> None:
    response = client.post("/validate", json=genus2_graph)
    assert response.status_code == 200
    assert response.json()["is_valid"] is True

    unstable = {"vertices": ["v0"], "edges": [], "tails": [{"id": "t1", "vertex": "v0", "nu": 1}]}
    response = client.post("/validate", json=unstable)
    assert response.status_code == 200
    assert response.json()["is_valid"] is False


def test_validate_upload(client, genus2_graph) -> None:
    response = client.post(
        "/validate/upload",
        files={"file": ("graph.json", json.dumps(genus2_graph).encode(), "application/json")},
    )
    assert response.status_code == 200
    assert response.json()["genus"] == 2

    response = client.post("/validate/upload", files={"file": ("graph.txt", b"{}", "text/plain")})
    assert response.status_code == 400

    response = client.post("/validate/upload", files={"file": ("graph.json", b"{nope", "application/json")})
    assert response.status_code == 400
    assert "parse error" in response.json()["detail"]


def test_mzv_status_codes(client) -> None:
    response = client.post("/kz/mzv", json={"indices": [2]})
    assert response.status_code == 200
    assert response.json()["value"].startswith("1.644934066848")

    response = client.post("/kz/mzv", json={"indices": [1, 2]})
    assert response.status_code == 422
    assert response.json()["detail"].startswith("KZError")

    assert client.post("/kz/mzv", json={"indices": []}).status_code == 400


def test_kz_assignment(client, lollipop_graph_file) -> None:
    response = client.post("/kz/assignment", json={"graph": lollipop_graph_file, "weight": 2})
    assert response.status_code == 200
    body = response.json()
    assert body["vertex_sums_vanish"] is True
    assert body["eliminated_tail"] == "t2"


def test_periods(client, genus1_graph, genus1_params) -> None:
    response = client.post("/periods", json={"graph": genus1_graph, "params": genus1_params, "wordlen": 3})
    assert response.status_code == 200
    body = response.json()
    assert body["generators"] == ["l1"]
    assert body["max_oracle_residual"] < 1e-8
    assert body["a_cycle_residual"] < 1e-8
