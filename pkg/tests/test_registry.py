"""Content-addressed artifact store: ids, atomicity, lookup errors."""

import json
import os

import pytest

from aqindex.registry import (
    Registry,
    UnknownCohort,
    UnknownModel,
    UnknownRun,
    canonical_json,
    content_id,
)


def test_canonical_json_is_order_insensitive():
    a = canonical_json({"b": 1, "a": [1, 2]})
    b = canonical_json({"a": [1, 2], "b": 1})
    assert a == b


def test_canonical_json_rejects_nan():
    with pytest.raises(ValueError):
        canonical_json({"x": float("nan")})


def test_content_id_is_stable_and_prefixed():
    i1 = content_id("m", {"kind": "m1", "seed": 0})
    i2 = content_id("m", {"seed": 0, "kind": "m1"})
    assert i1 == i2
    assert i1.startswith("m-") and len(i1) == 2 + 16


def test_content_id_changes_with_content():
    assert content_id("m", {"seed": 0}) != content_id("m", {"seed": 1})


def test_cohort_roundtrip(tmp_path):
    reg = Registry(tmp_path)
    doc = {"level": "Prof", "members": []}
    cid = reg.put_cohort(doc)
    assert reg.get_cohort(cid) == doc
    assert cid in reg.list_cohorts()


def test_put_same_cohort_twice_same_id(tmp_path):
    reg = Registry(tmp_path)
    doc = {"level": "Prof", "members": [{"x": 1}]}
    assert reg.put_cohort(doc) == reg.put_cohort(dict(doc))
    assert len(reg.list_cohorts()) == 1


def test_unknown_lookups_raise(tmp_path):
    reg = Registry(tmp_path)
    with pytest.raises(UnknownCohort):
        reg.get_cohort("c-0000000000000000")
    with pytest.raises(UnknownModel):
        reg.get_model("m-0000000000000000")
    with pytest.raises(UnknownRun):
        reg.get_run("r-0000000000000000")


def test_model_meta_kept_out_of_artifact(tmp_path):
    reg = Registry(tmp_path)
    artifact = {"schema": 1, "weights": [1.0]}
    reg.put_model("m-abc123", artifact, meta={"created_at": "sometime"})
    assert reg.get_model("m-abc123") == artifact
    assert reg.get_model_meta("m-abc123")["created_at"] == "sometime"
    on_disk = json.loads(reg.model_path("m-abc123").read_text())
    assert "created_at" not in on_disk


def test_model_bytes_are_deterministic(tmp_path):
    r1 = Registry(tmp_path / "a")
    r2 = Registry(tmp_path / "b")
    artifact = {"z": [1, 2, 3], "a": {"nested": True}}
    r1.put_model("m-x1", artifact)
    r2.put_model("m-x1", artifact)
    assert (r1.model_path("m-x1").read_bytes()
            == r2.model_path("m-x1").read_bytes())


def test_hostile_ids_are_rejected(tmp_path):
    # ids that could escape the store map to not-found, never to file access
    reg = Registry(tmp_path)
    for bad in ("../escape", "a/b", "", ".hidden", "x" * 100):
        with pytest.raises(UnknownModel):
            reg.get_model(bad)
        with pytest.raises((UnknownRun, ValueError)):
            reg.put_run(bad, {})
    assert not (tmp_path / "escape.json").exists()


def test_failed_write_leaves_no_partial_file(tmp_path, monkeypatch):
    reg = Registry(tmp_path)

    class Boom(RuntimeError):
        pass

    real_replace = os.replace

    def exploding_replace(src, dst):
        raise Boom("disk on fire")

    monkeypatch.setattr(os, "replace", exploding_replace)
    with pytest.raises(Boom):
        reg.put_run("r-deadbeef", {"status": "done"})
    monkeypatch.setattr(os, "replace", real_replace)
    # neither the final file nor any temp litter should exist
    run_dir = tmp_path / "runs"
    assert list(run_dir.iterdir()) == []
    with pytest.raises(UnknownRun):
        reg.get_run("r-deadbeef")


def test_overwrite_is_atomic_update(tmp_path):
    reg = Registry(tmp_path)
    reg.put_run("r-abc", {"status": "running"})
    reg.put_run("r-abc", {"status": "done"})
    assert reg.get_run("r-abc")["status"] == "done"
    assert len(reg.list_runs()) == 1


def test_lock_is_per_key(tmp_path):
    reg = Registry(tmp_path)
    a = reg.lock_for("train:c-1")
    b = reg.lock_for("train:c-2")
    assert a is not b
    assert a is reg.lock_for("train:c-1")
    with a:
        pass   # usable as a context manager
