"""Few-shot named entity recognition with demonstrations."""

import json

from . import _core
from ._core import (
    Corpus,
    DataError,
    Error,
    ProviderError,
    TrainingDivergence,
    UsageError,
    content_hash,
    feature_jaccard,
)

__all__ = [
    "Corpus",
    "DataError",
    "Error",
    "Pipeline",
    "ProviderError",
    "TrainingDivergence",
    "UsageError",
    "content_hash",
    "corpus_from_instances",
    "default_config",
    "entity_f1",
    "feature_jaccard",
    "instances",
    "summary",
]


def default_config():
    """Every run option with its default value."""
    return json.loads(_core._default_config_json())


def instances(corpus):
    """The corpus as a list of {id, tokens, tags} dicts; tags is None when unlabeled."""
    return json.loads(corpus._instances_json())


def corpus_from_instances(items):
    """Build a corpus from dicts shaped like those returned by instances()."""
    return Corpus._from_json(json.dumps(list(items)))


def summary(corpus):
    return json.loads(corpus._summary_json())


def entity_f1(gold, predictions):
    """Entity-level precision, recall and F1 of prediction dicts against a gold corpus."""
    text = "".join(json.dumps(p) + "\n" for p in predictions)
    return json.loads(_core._entity_f1_json(gold, text))


class Pipeline:
    """A trained predictor, demonstration pool and tagger."""

    def __init__(self, core):
        self._core = core

    @classmethod
    def train(cls, corpus, **options):
        """Train on a labeled corpus; options are run config keys such as k_shot or alpha."""
        return cls(_core.Pipeline._train(corpus, json.dumps(options)))

    @classmethod
    def load(cls, model_dir):
        return cls(_core.Pipeline.load(str(model_dir)))

    def save(self, model_dir):
        self._core.save(str(model_dir))

    @property
    def config(self):
        return json.loads(self._core._config_json())

    def tag(self, corpus):
        """Prediction dicts with id, tokens, tags and markups."""
        lines = self._core._tag_jsonl(corpus).splitlines()
        return [json.loads(line) for line in lines if line]

    def tag_conll(self, corpus):
        return self._core._tag_conll(corpus)
