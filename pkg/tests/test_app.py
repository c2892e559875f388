"""HTTP surface: health, surrogate checks, consistency reports, oracle values."""
import pytest
from fastapi.testclient import TestClient

from dtrlab.app import app


@pytest.fixture
def client():
    with TestClient(app) as test_client:
        yield test_client


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "healthy"
    assert body["registry_initialized"] is True


class TestConsistency:
    def test_counterexample(self, client):
        response = client.post("/consistency", json={"surrogate": "exp-concave", "tau": [5, 4, 6, 2]})
        assert response.status_code == 200
        body = response.json()
        assert body["verdict"] == "inconsistent"
        assert body["d1_star"] == -1

    def test_sigmoid(self, client):
        response = client.post("/consistency", json={"surrogate": "rational", "tau": [5, 4, 6, 2], "box": 20})
        assert response.status_code == 200
        assert response.json()["verdict"] == "consistent"

    def test_unknown_surrogate(self, client):
        response = client.post("/consistency", json={"surrogate": "softplus", "tau": [5, 4, 6, 2]})
        assert response.status_code == 404

    @pytest.mark.parametrize("payload", [
        {"surrogate": "arctan", "tau": [5, 4, 6, 0]},
        {"surrogate": "arctan", "tau": [5, 4, 6]},
        {"surrogate": "arctan", "tau": [5, 4, 6, 2], "box": 0},
    ])
    def test_invalid_request(self, client, payload):
        assert client.post("/consistency", json=payload).status_code == 422


class TestSurrogateCheck:
    def test_sigmoid_passes(self, client):
        body = client.get("/surrogates/arctan/check").json()
        assert body["surrogate"] == "arctan"
        assert body["condition_two"]["passed"] is True
        assert body["type_bounds"]["passed"] is True

    def test_comparator_is_rejected(self, client):
        body = client.get("/surrogates/hinge/check").json()
        assert body["condition_two"]["rejected"] is True
        assert body["type_bounds"]["rejected"] is True

    def test_unknown(self, client):
        assert client.get("/surrogates/softplus/check").status_code == 404


class TestOracleValue:
    def test_setting_two(self, client):
        response = client.post("/oracle/value", json={"setting": 2, "n_eval": 2000, "seed": 1})
        assert response.status_code == 200
        body = response.json()
        assert body["method"] == "mc" and body["n"] == 2000 and body["offset"] == 0.0
        assert abs(body["value"] - 2.0) < 4.0 * body["sd"]

    @pytest.mark.parametrize("payload", [{"setting": 6}, {"setting": 1, "n_eval": 1}])
    def test_invalid_request(self, client, payload):
        assert client.post("/oracle/value", json=payload).status_code == 422
