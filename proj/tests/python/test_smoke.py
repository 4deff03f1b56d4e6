import demoner
import pytest


@pytest.fixture(scope="module")
def data():
    return demoner.Corpus.synthetic("e2e", 120, 1), demoner.Corpus.synthetic("e2e", 20, 2)


@pytest.fixture(scope="module")
def pipeline(data):
    train, _ = data
    return demoner.Pipeline.train(
        train, k_shot=5, epochs=8, featsim_epochs=30, featsim_buckets=256, ensemble_k=3
    )


def test_conll_round_trip(data):
    train, _ = data
    text = train.to_conll()
    again = demoner.Corpus.from_conll(text)
    assert again.to_conll() == text
    assert len(again) == 120
    assert again.features == ["LOC", "ORG", "PER"]
    assert demoner.summary(again)["instances"] == 120


def test_instances_round_trip(data):
    _, test = data
    items = demoner.instances(test)
    assert items[0]["tags"] is not None
    assert demoner.corpus_from_instances(items).to_conll() == test.to_conll()


def test_jaccard():
    assert demoner.feature_jaccard(["B-PER", "O"], ["B-PER", "B-LOC"]) == 0.5
    assert demoner.feature_jaccard(["O"], ["O"]) == 0.0


def test_train_tag_evaluate(pipeline, data, tmp_path):
    _, test = data
    preds = pipeline.tag(test)
    assert len(preds) == len(test)
    report = demoner.entity_f1(test, preds)
    assert 0.0 <= report["f1"] <= 1.0

    pipeline.save(tmp_path / "model")
    loaded = demoner.Pipeline.load(tmp_path / "model")
    assert loaded.config == pipeline.config
    assert [p["tags"] for p in loaded.tag(test)] == [p["tags"] for p in preds]


def test_errors(data):
    train, _ = data
    with pytest.raises(demoner.DataError):
        demoner.Corpus.from_conll("Mary X-Y\n")
    with pytest.raises(demoner.UsageError):
        demoner.Pipeline.train(train, gamma=3.0)
    with pytest.raises(demoner.DataError):
        demoner.Pipeline.train(train, no_such_option=1)
    with pytest.raises(demoner.Error):
        demoner.Pipeline.load("/nonexistent/model")


def test_defaults():
    cfg = demoner.default_config()
    assert cfg["k_shot"] == 5
    assert cfg["encoder"] == "hashed"
