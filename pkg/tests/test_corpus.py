import json
import shutil

from qoptlab.fixtures import corpus, load_manifest, regenerate


def test_every_reference_has_provenance():
    for entry in load_manifest()["fixtures"]:
        for ref in entry["references"]:
            assert ref["provenance"].split(":")[0] in {"DERIVED", "TRIVIAL"}
            assert ref["command"].startswith("qoptlab ")


def test_regeneration_reproduces_references():
    report = regenerate()
    assert report["passed"], [r for r in report["rows"] if r["status"] != "ok"]


def test_regeneration_detects_drift(tmp_path):
    root = tmp_path / "corpus"
    shutil.copytree(corpus.package_corpus(), root)
    manifest = json.loads((root / "manifest.json").read_text())
    manifest["fixtures"][0]["references"][0]["value"] += 0.5
    (root / "manifest.json").write_text(json.dumps(manifest))
    report = regenerate(root)
    assert not report["passed"]
    assert sum(r["status"] == "diff" for r in report["rows"]) == 1


def test_environment_selects_corpus(tmp_path, monkeypatch):
    monkeypatch.setenv(corpus.CORPUS_ENV, str(tmp_path))
    assert corpus.corpus_root() == tmp_path
