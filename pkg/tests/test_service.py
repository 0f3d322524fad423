"""Tests for the HTTP service: state round-trips, previews, quick-eval."""

import json
from dataclasses import replace

import pytest
from fastapi.testclient import TestClient

from causalift.dataset import build_lagged_design, temporal_split, write_csv
from causalift.discovery import DiscoveryConfig, discover_graph
from causalift.features import featureset_to_json
from causalift.graph import from_json, summary_graph, to_json
from causalift.metrics import evaluate
from causalift.models import fit_ols
from causalift.pipeline import restrict_design, select_features
from causalift.service import create_app
from causalift.simulator import default_spec, simulate


@pytest.fixture(scope="module")
def backing(tmp_path_factory):
    """Graph JSON + dataset CSV pair the service loads at startup."""
    root = tmp_path_factory.mktemp("service")
    spec = replace(default_spec(seed=9), horizon_steps=1600)
    ds, _ = simulate(spec)
    train, _ = temporal_split(ds, 0.5)
    graph = discover_graph(train, DiscoveryConfig(tau_max=4))
    graph_path = root / "graph.json"
    graph_path.write_text(to_json(graph))
    data_path = root / "data.csv"
    write_csv(ds, data_path)
    return root, graph_path, data_path, graph, ds


@pytest.fixture()
def client(backing):
    _, graph_path, data_path, _, _ = backing
    app = create_app(graph_path, data_path, split_fraction=0.5, horizon=5)
    return TestClient(app)


def absent_triple(graph, target="In_Temp"):
    present = {l.key for l in graph.links}
    for source in graph.variables:
        for lag in range(1, graph.tau_max + 1):
            if source != target and (source, target, lag) not in present:
                return {"source": source, "target": target, "lag": lag}
    raise AssertionError("graph saturated")


class TestReadEndpoints:
    def test_graph_round_trips(self, client, backing):
        *_, graph, _ = backing
        res = client.get("/api/graph")
        assert res.status_code == 200
        assert res.json() == json.loads(to_json(graph))

    def test_summary_matches_projection(self, client, backing):
        *_, graph, _ = backing
        res = client.get("/api/summary")
        assert res.status_code == 200
        payload = res.json()
        assert payload["variables"] == list(graph.variables)
        assert len(payload["edges"]) == len(summary_graph(graph))
        for edge in payload["edges"]:
            assert edge["lags"] == sorted(edge["lags"])

    def test_features_match_direct_projection(self, client, backing):
        *_, graph, _ = backing
        res = client.get(
            "/api/features", params={"target": "In_Temp", "method": "causal-lags"}
        )
        assert res.status_code == 200
        from causalift.features import causal_lags

        assert res.json() == json.loads(featureset_to_json(causal_lags(graph, "In_Temp")))

    def test_data_driven_features_deterministic(self, client):
        params = {"target": "In_Temp", "method": "tree"}
        first = client.get("/api/features", params=params)
        second = client.get("/api/features", params=params)
        assert first.status_code == 200
        assert first.json() == second.json()

    def test_unknown_method_422(self, client):
        res = client.get("/api/features", params={"target": "In_Temp", "method": "x"})
        assert res.status_code == 422
        assert "unknown method" in res.json()["detail"]

    def test_unknown_target_422(self, client):
        res = client.get(
            "/api/features", params={"target": "Nope", "method": "causal-lags"}
        )
        assert res.status_code == 422


class TestEdits:
    def test_preview_leaves_state_untouched(self, client, backing):
        *_, graph, _ = backing
        edit = absent_triple(graph)
        before = client.get("/api/graph").json()
        res = client.post(
            "/api/edits", json={"author": "expert", "add": [edit], "commit": False}
        )
        assert res.status_code == 200
        body = res.json()
        assert body["committed"] is False
        keys = {tuple(l[k] for k in ("source", "target", "lag")) for l in body["graph"]["links"]}
        assert (edit["source"], edit["target"], edit["lag"]) in keys
        assert client.get("/api/graph").json() == before

    def test_preview_feeds_feature_queries(self, client, backing):
        *_, graph, _ = backing
        edit = absent_triple(graph)
        base = client.get(
            "/api/features", params={"target": "In_Temp", "method": "causal-lags"}
        ).json()
        client.post(
            "/api/edits", json={"author": "expert", "add": [edit], "commit": False}
        )
        previewed = client.get(
            "/api/features",
            params={"target": "In_Temp", "method": "causal-lags", "preview": True},
        ).json()
        assert len(previewed["columns"]) == len(base["columns"]) + 1
        assert [edit["source"], edit["lag"]] in previewed["columns"]

    def test_preview_without_staging_409(self, client):
        res = client.get(
            "/api/features",
            params={"target": "In_Temp", "method": "causal-lags", "preview": True},
        )
        assert res.status_code == 409
        assert "no preview staged" in res.json()["detail"]

    def test_commit_updates_state_and_persists(self, backing):
        root, graph_path, data_path, graph, _ = backing
        app = create_app(graph_path, data_path)
        local = TestClient(app)
        edit = absent_triple(graph)
        res = local.post("/api/edits", json={"author": "expert", "add": [edit]})
        assert res.status_code == 200
        assert res.json()["committed"] is True
        current = local.get("/api/graph").json()
        match = [
            l
            for l in current["links"]
            if (l["source"], l["target"], l["lag"])
            == (edit["source"], edit["target"], edit["lag"])
        ]
        assert len(match) == 1
        assert match[0]["provenance"] == "expert-added"
        assert match[0]["strength"] is None
        persisted = root / "graph_edited.json"
        assert persisted.is_file()
        assert json.loads(persisted.read_text()) == current
        from_json(persisted.read_text())  # parses as a valid graph document

    def test_conflicting_add_422_and_preserves_state(self, client, backing):
        *_, graph, _ = backing
        existing = graph.links[0]
        before = client.get("/api/graph").json()
        res = client.post(
            "/api/edits",
            json={
                "author": "expert",
                "add": [
                    {
                        "source": existing.source,
                        "target": existing.target,
                        "lag": existing.lag,
                    }
                ],
            },
        )
        assert res.status_code == 422
        assert "already in graph" in res.json()["detail"]
        assert client.get("/api/graph").json() == before

    def test_empty_author_422(self, client):
        res = client.post("/api/edits", json={"author": "", "add": []})
        assert res.status_code == 422
        assert "author" in res.json()["detail"]

    def test_malformed_entry_422_names_field_path(self, client):
        res = client.post(
            "/api/edits",
            json={"author": "expert", "add": [{"source": "Hour", "lag": 1}]},
        )
        assert res.status_code == 422
        locs = [tuple(err["loc"]) for err in res.json()["detail"]]
        assert ("body", "add", 0, "target") in locs

    def test_sequential_conflicting_commits_serialized(self, backing):
        _, graph_path, data_path, graph, _ = backing
        local = TestClient(create_app(graph_path, data_path))
        edit = absent_triple(graph)
        first = local.post("/api/edits", json={"author": "a", "add": [edit]})
        second = local.post("/api/edits", json={"author": "b", "add": [edit]})
        assert first.status_code == 200
        assert second.status_code == 422  # sees first commit, not a torn state


class TestQuickEval:
    def test_exact_key_set_and_determinism(self, client):
        body = {"target": "In_Temp", "method": "causal-lags"}
        first = client.post("/api/quick-eval", json=body)
        assert first.status_code == 200
        payload = first.json()
        assert set(payload) == {"mae", "mape", "mae_w", "n_features", "windows"}
        assert payload["mae"] >= 0.0
        assert payload["n_features"] >= 1
        assert first.json() == client.post("/api/quick-eval", json=body).json()

    def test_matches_direct_ols_evaluation(self, client, backing):
        *_, graph, ds = backing
        res = client.post(
            "/api/quick-eval", json={"target": "In_Temp", "method": "causal-lags"}
        ).json()
        train_ds, test_ds = temporal_split(ds, 0.5)
        train = build_lagged_design(train_ds, "In_Temp", graph.tau_max, role="train")
        test = build_lagged_design(test_ds, "In_Temp", graph.tau_max, role="test")
        fs = select_features("causal-lags", graph, train, seed=0)
        sub_train, sub_test = restrict_design(fs, train), restrict_design(fs, test)
        model = fit_ols(sub_train.X, sub_train.y)
        row = evaluate(
            model, sub_test, events=test_ds.interventions, horizon=5,
            selector="causal-lags", n_features=fs.n_features,
        )
        assert res["mae"] == pytest.approx(row.mae, abs=1e-12)
        assert res["mae_w"] == pytest.approx(row.mae_w, abs=1e-12) or (
            res["mae_w"] is None and row.mae_w is None
        )
        assert res["windows"] == row.window_count

    def test_empty_selection_409(self, client, backing):
        *_, graph, _ = backing
        target = "In_Temp"
        removals = [
            {"source": l.source, "target": l.target, "lag": l.lag}
            for l in graph.links
            if l.target == target
        ]
        res = client.post(
            "/api/edits", json={"author": "expert", "remove": removals, "commit": False}
        )
        assert res.status_code == 200
        res = client.post(
            "/api/quick-eval",
            json={"target": target, "method": "causal-lags", "preview": True},
        )
        assert res.status_code == 409
        assert "selects no features" in res.json()["detail"]

    def test_unknown_method_422(self, client):
        res = client.post("/api/quick-eval", json={"target": "In_Temp", "method": "x"})
        assert res.status_code == 422

    def test_horizon_override_changes_windows(self, client):
        narrow = client.post(
            "/api/quick-eval",
            json={"target": "In_Temp", "method": "all", "horizon": 1},
        ).json()
        wide = client.post(
            "/api/quick-eval",
            json={"target": "In_Temp", "method": "all", "horizon": 12},
        ).json()
        assert narrow["windows"] <= wide["windows"]


class TestStatic:
    def test_static_mount_serves_index(self, backing, tmp_path):
        _, graph_path, data_path, _, _ = backing
        site = tmp_path / "site"
        site.mkdir()
        (site / "index.html").write_text("<html><body>studio</body></html>")
        local = TestClient(create_app(graph_path, data_path, static_dir=site))
        res = local.get("/")
        assert res.status_code == 200
        assert "studio" in res.text
        assert local.get("/api/graph").status_code == 200
