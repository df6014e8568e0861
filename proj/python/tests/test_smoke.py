import json
import math

import pytest

import kgntm

CONFIG = {
    "seed": 4,
    "simulate": {
        "planted": {"K": 3, "V": 30, "seeded_topics": 2, "seeds_per_topic": 3,
                    "risk_topics": [0], "feature_dim": 3},
        "docs": 40,
        "flag_scale": 1.0,
    },
    "train": {
        "hyper": {"K": 3},
        "max_epochs": 4,
        "min_epochs": 4,
        "gibbs": {"iterations": 20},
        "distill_epochs": 3,
        "network": {"label_hidden": [8], "feature_hidden": [8], "theta_hidden": [8],
                    "global_hidden": [8], "eta_hidden": [8]},
    },
}


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    d = tmp_path_factory.mktemp("run")
    cfg = d / "config.json"
    cfg.write_text(json.dumps(CONFIG))
    sim = d / "sim"
    corpus, onto, ckpt = sim / "corpus.jsonl", sim / "ontology.json", d / "model.ckpt"
    code, _, err = kgntm.run_cli(["simulate", "--config", str(cfg), "--out", str(sim)])
    assert code == 0, err
    code, _, err = kgntm.run_cli(["train", "--config", str(cfg), "--corpus", str(corpus),
                                  "--ontology", str(onto), "--checkpoint", str(ckpt)])
    assert code == 0, err
    return corpus, ckpt


def test_b_prime_worked_example():
    b = kgntm.b_prime([0.2, 0.3, 0.5], 0.6)
    h = [0.12, 0.18, 0.30]
    for k in range(3):
        rest = sum(x * x for i, x in enumerate(h) if i != k)
        assert b[k] == pytest.approx(h[k] ** 2 / (h[k] + rest), abs=1e-15)


def test_theta_tilde_masks_and_normalizes():
    t = kgntm.theta_tilde([0.2, 0.3, 0.5], [1, 0, 1])
    assert t == pytest.approx([0.2 / 0.7, 0.0, 0.5 / 0.7])


def test_umass_hand_example():
    docs = [[0, 1], [0], [1, 2]]
    # D(0) = 2, D(0, 1) = 1: log((1 + 1) / 2) = 0.
    assert kgntm.umass_coherence([0, 1], docs) == pytest.approx(0.0)
    # D(1) = 2 as well, so the swapped order also gives 0.
    assert kgntm.umass_coherence([1, 0], docs) == pytest.approx(0.0)


def test_hungarian_and_metrics():
    assert kgntm.hungarian([[4, 1], [2, 3]]) == [1, 0]
    m = kgntm.classification_metrics([1, 0, 1, 1], [1, 0, 0, 1])
    assert m["precision"] == pytest.approx(2 / 3)
    assert m["recall"] == pytest.approx(1.0)
    assert m["f1"] == pytest.approx(0.8)


def test_split_sizes():
    train, val, test = kgntm.split_70_15_15(100, 3)
    assert (len(train), len(val), len(test)) == (70, 15, 15)
    assert sorted(train + val + test) == list(range(100))


def test_cli_usage_error():
    code, _, err = kgntm.run_cli(["train"])
    assert code == 2
    assert json.loads(err.strip().splitlines()[-1])["error"]


def test_model_predict_and_topics(trained):
    corpus, ckpt = trained
    model = kgntm.Model.load(str(ckpt))
    assert model.num_topics == 3
    preds = model.predict(str(corpus))
    assert len(preds) == 40
    for p in preds:
        assert math.isclose(sum(p["theta"]), 1.0, abs_tol=1e-9)
        assert 0.0 <= p["probability"] <= 1.0
        assert p["label"] == int(p["probability"] >= 0.5)
    assert model.predict(str(corpus)) == preds
    topics = model.topics(5)
    assert len(topics["topics"]) == 3
