import json
import math
import os
import random
import subprocess

import numpy as np
import pytest

import e4s

sklearn_metrics = pytest.importorskip("sklearn.metrics")


def make_corpus(n, shuffle=False, seed=0):
    rng = random.Random(seed)
    owners = list(range(n))
    if shuffle:
        rng.shuffle(owners)
    lines = []
    for i in range(n):
        personas = {}
        for role in ("user1", "user2"):
            o = owners[i]
            personas[role] = [f"I like zq{o}{role}a and zq{o}{role}b.", f"My pet is named zq{o}{role}c."]
        turns = []
        for t in range(6):
            role = "user1" if t % 2 == 0 else "user2"
            own = f"zq{i}{role}"
            turns.append({"speaker": role, "text": f"Oh nice. I like {own}a and {own}b. Tell me more."})
        lines.append(json.dumps({"id": f"c{i:03d}", "personas": personas, "turns": turns}))
    return "\n".join(lines) + "\n"


def test_import_and_version():
    assert e4s.__version__
    assert issubclass(e4s.DataError, e4s.Error)


def test_corpus_parsing():
    c = e4s.parse_corpus(make_corpus(3))
    assert len(c) == 3
    assert c.conversations[0].id == "c000"
    assert c.conversations[0].persona(e4s.SpeakerRole.USER2)[0].startswith("I like")
    report = e4s.validate(c)
    assert report["errors"] == []
    with pytest.raises(e4s.DataError):
        e4s.parse_corpus("{oops")
    assert e4s.parse_corpus(c.to_jsonl()).to_jsonl() == c.to_jsonl()


def test_interpolation_and_curves():
    assert e4s.blend_scores(1.0, 0.0, 0.5) == pytest.approx(1 - math.sin(math.pi / 4))
    assert e4s.span_weights([1, 5, 10]) == [4, 4.5, 5]
    a = [(1, 1.0), (5, 0.8), (10, 0.6)]
    b = [(1, 0.9), (5, 0.7), (10, 0.5)]
    w = np.array([4, 4.5, 5])
    av, bv = np.array([m for _, m in a]), np.array([m for _, m in b])
    want = (w * av * bv).sum() / max((w * av * av).sum(), (w * bv * bv).sum())
    assert e4s.curve_similarity(a, b) == pytest.approx(want, abs=1e-12)
    assert e4s.normalized_auc([(1, 1.0), (3, 0.5)]) == pytest.approx(0.75)


def test_pan_metrics_against_sklearn():
    rng = np.random.default_rng(4)
    for _ in range(50):
        n = int(rng.integers(4, 60))
        y = rng.integers(0, 2, n)
        y[0], y[1] = 0, 1
        s = np.round(rng.random(n), 1)
        got = e4s.pan_metrics(s.tolist(), [bool(v) for v in y])
        assert got["auc"] == pytest.approx(sklearn_metrics.roc_auc_score(y, s), abs=1e-12)
        assert got["brier"] == pytest.approx(1 - sklearn_metrics.brier_score_loss(y, s), abs=1e-12)
        decided = s != 0.5
        if decided.any() and (y[decided] == 1).any():
            f1 = sklearn_metrics.f1_score(y[decided], (s[decided] > 0.5).astype(int), zero_division=0)
            assert got["f1"] == pytest.approx(f1, abs=1e-12)
        five = [got[k] for k in ("f1", "auc", "brier", "c_at_1", "f05u")]
        assert got["consistency"] == pytest.approx(sum(five) / 5, abs=1e-12)


def test_calibration_and_thresholds():
    assert e4s.calibrate_score(0.5, 0.4, 0.6) == 0.5
    assert e4s.calibrate_score(0.2, 0.4, 0.6) == pytest.approx(0.245)
    assert e4s.select_thresholds([1.0] * 4, [True, True, False, False])[:2] == (0.01, 0.01)


def test_naturalness_and_report_helpers():
    assert e4s.coherence_score(["neutral", "neutral"]) == 0.5
    assert e4s.label_distribution(["entailment", "neutral"]) == (0.5, 0.5, 0.0)
    assert e4s.naturalness_score(0.5, 0.0, 0.0) == pytest.approx(0.7)
    assert e4s.aggregate_e4s(0.974, 0.917, 0.960) == pytest.approx(0.950, abs=1e-3)
    assert e4s.competition_ranks([0.9, 0.9, 0.8]) == [1, 1, 3]
    with pytest.raises(e4s.ConfigError):
        e4s.coherence_score(["maybe"])


def test_sparse_index():
    idx = e4s.SparseIndex.build([("a", "red apples"), ("b", "green pears"), ("c", "red pears")])
    ranked = idx.rank("red apples")
    assert ranked[0][0] == "a"
    assert [d for d, _ in ranked] == sorted([d for d, _ in ranked], key=lambda d: (-dict(ranked)[d], d))


@pytest.fixture()
def corpora(tmp_path):
    (tmp_path / "ref.jsonl").write_text(make_corpus(20))
    (tmp_path / "copy.jsonl").write_text(make_corpus(20))
    (tmp_path / "shuffled.jsonl").write_text(make_corpus(20, shuffle=True, seed=3))
    return tmp_path


def base_config(out):
    return {
        "reference": "ref.jsonl",
        "simulations": ["copy.jsonl", "shuffled.jsonl"],
        "seed": 1,
        "output_dir": str(out),
        "adherence": {"pool_sizes": [0, 1, 5, 19], "repetitions": 3},
        "naturalness": {"provider": "mock", "mock": "hashed"},
    }


def test_run_pipeline(corpora):
    report = e4s.run(base_config(corpora / "out"), base_dir=str(corpora))
    names = [d["dataset"] for d in report["datasets"]]
    assert names == ["ref", "copy", "shuffled"]
    copy = report["datasets"][1]
    assert copy["e4s"] == 1.0
    shuffled = report["datasets"][2]
    assert shuffled["dimensions"]["adherence"]["similarity"] < 1.0
    assert (corpora / "out" / "summary.md").exists()
    with pytest.raises(e4s.ConfigError):
        e4s.run({"reference": "ref.jsonl", "typo": 1}, base_dir=str(corpora), write=False)


cli = os.environ.get("E4S_CLI")


@pytest.mark.skipif(not cli, reason="CLI not built")
def test_cli_exit_codes(corpora):
    cfg = corpora / "run.json"
    cfg.write_text(json.dumps(base_config(corpora / "cli-out")))
    ok = subprocess.run([cli, "e4s", "--config", str(cfg)], capture_output=True, text=True)
    assert ok.returncode == 0, ok.stderr
    assert (corpora / "cli-out" / "report.json").exists()

    assert subprocess.run([cli, "e4s", "--no-such-flag"], capture_output=True).returncode == 1
    assert subprocess.run([cli, "validate", "--reference", str(corpora / "ref.jsonl")], capture_output=True).returncode == 0

    (corpora / "bad.jsonl").write_text("not json\n")
    bad = subprocess.run([cli, "validate", "--reference", str(corpora / "bad.jsonl")], capture_output=True, text=True)
    assert bad.returncode == 2

    partial = subprocess.run(
        [cli, "naturalness", "--reference", str(corpora / "ref.jsonl"), "--nli", "precomputed", "--out",
         str(corpora / "p-out")], capture_output=True, text=True)
    assert partial.returncode == 4
    failures = json.loads((corpora / "p-out" / "failures.json").read_text())
    assert "missing NLI record" in json.dumps(failures)
