import base64
import json

import pytest
from fastapi.testclient import TestClient

from valori.kernel import HnswParams, KernelConfig
from valori.node import create_app
from valori.replaylog import replay
from valori.snapshot import content_hash, deserialize

from conftest import FIXTURES

PINS = json.loads((FIXTURES / "pins.json").read_text())

CONFIG = KernelConfig(dim=4, hnsw=HnswParams(m=4, ef_construction=16, ef_search=16))


@pytest.fixture
def client():
    with TestClient(create_app(CONFIG)) as c:
        yield c


def insert(c, vid, vec, meta=None):
    body = {"id": vid, "vector": vec}
    if meta is not None:
        body["metadata"] = base64.b64encode(meta).decode()
    return c.post("/v1/insert", json=body)


class TestMutations:
    def test_insert_returns_clock_and_hash(self, client):
        r = insert(client, 1, [1, 0, 0, 0], b"hello")
        assert r.status_code == 200
        body = r.json()
        assert body["clock"] == 1
        assert len(body["state_hash"]) == 64

    def test_duplicate_409(self, client):
        insert(client, 1, [0, 0, 0, 0])
        r = insert(client, 1, [1, 1, 1, 1])
        assert r.status_code == 409
        assert r.json()["error"] == "DuplicateId"

    def test_delete_then_reuse_409(self, client):
        insert(client, 1, [0, 0, 0, 0])
        assert client.post("/v1/delete", json={"id": 1}).status_code == 200
        assert insert(client, 1, [0, 0, 0, 0]).status_code == 409

    def test_delete_unknown_404(self, client):
        r = client.post("/v1/delete", json={"id": 77})
        assert r.status_code == 404
        assert r.json()["error"] == "UnknownId"

    def test_nan_422(self, client):
        r = client.post(
            "/v1/insert",
            content='{"id": 9, "vector": [NaN, 0, 0, 0]}',
            headers={"content-type": "application/json"},
        )
        assert r.status_code == 422

    def test_dim_mismatch_400(self, client):
        assert insert(client, 1, [1, 2]).status_code == 400

    def test_bad_base64_400(self, client):
        r = client.post(
            "/v1/insert", json={"id": 1, "vector": [0, 0, 0, 0], "metadata": "@@@"}
        )
        assert r.status_code == 400

    def test_link_self_400(self, client):
        insert(client, 1, [0, 0, 0, 0])
        assert client.post("/v1/link", json={"a": 1, "b": 1}).status_code == 400

    def test_link_ok(self, client):
        insert(client, 1, [0, 0, 0, 0])
        insert(client, 2, [1, 0, 0, 0])
        r = client.post("/v1/link", json={"a": 2, "b": 1})
        assert r.status_code == 200 and r.json()["clock"] == 3


class TestQuery:
    def test_distances_are_strings(self, client):
        insert(client, 1, [0, 0, 0, 0])
        insert(client, 2, [1, 0, 0, 0])
        r = client.post("/v1/query", json={"vector": [0, 0, 0, 0], "k": 2})
        assert r.status_code == 200
        body = r.json()
        assert [e["id"] for e in body["results"]] == [1, 2]
        assert body["results"][0]["distance_raw"] == "0"
        assert body["results"][1]["distance"] == "1"
        assert isinstance(body["results"][1]["distance_raw"], str)

    def test_query_does_not_mutate(self, client):
        insert(client, 1, [1, 0, 0, 0])
        h0 = client.get("/v1/hash").json()["state_hash"]
        client.post("/v1/query", json={"vector": [0, 0, 0, 0], "k": 1})
        assert client.get("/v1/hash").json()["state_hash"] == h0

    def test_served_hash_matches_hash_endpoint(self, client):
        insert(client, 1, [1, 0, 0, 0])
        r = client.post("/v1/query", json={"vector": [0, 0, 0, 0], "k": 1})
        assert r.json()["state_hash"] == client.get("/v1/hash").json()["state_hash"]


class TestSnapshotRestore:
    def test_snapshot_stream_and_restore(self, client):
        for i in range(5):
            insert(client, i, [i, 0, 0, 0], f"m{i}".encode())
        client.post("/v1/delete", json={"id": 2})
        snap = client.get("/v1/snapshot")
        assert snap.status_code == 200
        data = snap.content
        h = client.get("/v1/hash").json()["state_hash"]
        assert content_hash(data) == h
        # a fresh node restores to the identical state
        with TestClient(create_app(CONFIG)) as other:
            r = other.post("/v1/restore", content=data)
            assert r.status_code == 200
            assert r.json()["state_hash"] == h
            assert other.get("/v1/hash").json()["state_hash"] == h

    def test_restore_corrupt_422(self, client):
        snap = bytearray(client.get("/v1/snapshot").content)
        snap[0] ^= 0xFF
        assert client.post("/v1/restore", content=bytes(snap)).status_code == 422

    def test_restore_config_mismatch_409(self, client):
        other_cfg = KernelConfig(dim=8, hnsw=HnswParams(m=4, ef_construction=16, ef_search=16))
        with TestClient(create_app(other_cfg)) as other:
            snap = other.get("/v1/snapshot").content
        assert client.post("/v1/restore", content=snap).status_code == 409

    def test_failed_restore_leaves_state_untouched(self, client):
        insert(client, 1, [1, 0, 0, 0])
        h = client.get("/v1/hash").json()["state_hash"]
        client.post("/v1/restore", content=b"garbage")
        assert client.get("/v1/hash").json()["state_hash"] == h


class TestTwinNodes:
    def test_same_commands_same_hashes(self):
        with TestClient(create_app(CONFIG)) as a, TestClient(create_app(CONFIG)) as b:
            script = [
                ("/v1/insert", {"id": 1, "vector": [0.25, -0.5, 0.75, 0]}),
                ("/v1/insert", {"id": 2, "vector": [1, 1, 0, 0]}),
                ("/v1/insert", {"id": 3, "vector": [0, 0, 0, 1]}),
                ("/v1/link", {"a": 1, "b": 3}),
                ("/v1/delete", {"id": 2}),
            ]
            for path, body in script:
                ra = a.post(path, json=body)
                rb = b.post(path, json=body)
                assert ra.json() == rb.json()
            qa = a.post("/v1/query", json={"vector": [0.1, 0.1, 0.1, 0.1], "k": 5})
            qb = b.post("/v1/query", json={"vector": [0.1, 0.1, 0.1, 0.1], "k": 5})
            assert qa.json() == qb.json()


class TestLogPersistence:
    def test_log_replays_to_served_state(self, tmp_path):
        log = tmp_path / "node.vkl"
        with TestClient(create_app(CONFIG, log_path=log)) as c:
            for i in range(4):
                insert(c, i, [i, 1, 0, 0])
            c.post("/v1/delete", json={"id": 0})
            served = c.get("/v1/hash").json()["state_hash"]
        _, final = replay(log)
        assert final == served

    def test_restart_resumes_from_log(self, tmp_path):
        log = tmp_path / "node.vkl"
        with TestClient(create_app(CONFIG, log_path=log)) as c:
            insert(c, 1, [1, 0, 0, 0])
            h1 = c.get("/v1/hash").json()["state_hash"]
        with TestClient(create_app(CONFIG, log_path=log)) as c:
            assert c.get("/v1/hash").json()["state_hash"] == h1
            insert(c, 2, [0, 1, 0, 0])
            h2 = c.get("/v1/hash").json()["state_hash"]
        _, final = replay(log)
        assert final == h2

    def test_rejected_commands_not_logged(self, tmp_path):
        log = tmp_path / "node.vkl"
        with TestClient(create_app(CONFIG, log_path=log)) as c:
            insert(c, 1, [1, 0, 0, 0])
            assert insert(c, 1, [0, 0, 0, 0]).status_code == 409
            assert c.post("/v1/delete", json={"id": 9}).status_code == 404
        state, _ = replay(log)
        assert state.clock == 1


def test_health(client):
    r = client.get("/v1/health")
    assert r.status_code == 200 and r.json()["status"] == "ok"
