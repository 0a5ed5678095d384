import pytest
from fastapi.testclient import TestClient

from realabel.annotation import TaskService, ingest_answers
from realabel.server import create_app
from realabel.tasking import make_label_task


@pytest.fixture
def client(tmp_path):
    tasks = [
        make_label_task("imgA", (0, 1, 2), required_raters=2),
        make_label_task("imgB", (3,), required_raters=2),
    ]
    service = TaskService(tasks, log_path=tmp_path / "answers.jsonl")
    app = create_app(service, image_base_url="http://imgs.example/val")
    with TestClient(app) as tc:
        tc.log_path = tmp_path / "answers.jsonl"
        tc.tasks = tasks
        yield tc
    service.close()


def test_config_exposes_image_base_url(client):
    assert client.get("/api/config").json() == {
        "image_base_url": "http://imgs.example/val"
    }


def test_next_task_and_answer_roundtrip(client):
    resp = client.get("/api/tasks/next", params={"rater_id": "r1"})
    task = resp.json()["task"]
    assert task["kind"] == "label-assessment"
    ack = client.post("/api/answers", json={
        "task_id": task["task_id"],
        "rater_id": "r1",
        "verdicts": ["yes", "no", "maybe"][: len(task["options"])],
    })
    assert ack.status_code == 200
    assert ack.json()["ack"]["answers"] == 1
    logged = ingest_answers(client.log_path)
    assert logged[0].task_id == task["task_id"]


def test_task_lookup(client):
    tid = client.tasks[0].task_id
    assert client.get(f"/api/tasks/{tid}").json()["task"]["image_id"] == "imgA"
    assert client.get("/api/tasks/zzz").status_code == 404


def test_duplicate_answer_conflict(client):
    tid = client.tasks[1].task_id
    body = {"task_id": tid, "rater_id": "r9", "verdicts": ["yes"]}
    assert client.post("/api/answers", json=body).status_code == 200
    assert client.post("/api/answers", json=body).status_code == 409


def test_arity_mismatch_bad_request(client):
    tid = client.tasks[0].task_id
    resp = client.post("/api/answers", json={
        "task_id": tid, "rater_id": "r1", "verdicts": ["yes"],
    })
    assert resp.status_code == 400


def test_missing_field_bad_request(client):
    assert client.post("/api/answers", json={"task_id": "x"}).status_code == 400


def test_progress_counts(client):
    for rater in ("a", "b"):
        task = client.get("/api/tasks/next", params={"rater_id": rater}).json()["task"]
        client.post("/api/answers", json={
            "task_id": task["task_id"], "rater_id": rater,
            "verdicts": ["yes"] * len(task["options"]),
        })
    progress = client.get("/api/progress").json()
    assert progress["tasks"] == 2
    assert progress["answers"] == 2


def test_static_ui_mount_serves_page_and_assets(tmp_path):
    ui = tmp_path / "dist"
    ui.mkdir()
    (ui / "index.html").write_text("<main id=app></main>")
    (ui / "main.js").write_text("// app")
    service = TaskService([make_label_task("img", (0,))])
    app = create_app(service, ui_dir=ui)
    with TestClient(app) as tc:
        assert "main id=app" in tc.get("/").text
        assert tc.get("/main.js").status_code == 200
        assert tc.get("/api/progress").status_code == 200


def test_exhausted_rater_gets_null(client):
    for _ in range(2):
        task = client.get("/api/tasks/next", params={"rater_id": "solo"}).json()["task"]
        client.post("/api/answers", json={
            "task_id": task["task_id"], "rater_id": "solo",
            "verdicts": ["yes"] * len(task["options"]),
        })
    assert client.get("/api/tasks/next", params={"rater_id": "solo"}).json()["task"] is None
