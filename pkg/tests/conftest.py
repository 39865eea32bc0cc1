import numpy as np
import pytest

import hftt


@pytest.fixture(scope="session")
def default_fixture():
    """The stock two-modality sample: d=64, 10k per mode, noise 0.3, seed 42."""
    return hftt.sample_bimodal(hftt.default_bimodal_config(seed=42))


@pytest.fixture(scope="session")
def small_fixture():
    """A faster variant of the stock sample for module-level tests."""
    return hftt.sample_bimodal(
        hftt.default_bimodal_config(samples_per_class=2000, seed=5)
    )


def union_corpus(sample) -> hftt.EmbeddingStore:
    """Both text modes stacked into one store, the annotation-free corpus."""
    return hftt.EmbeddingStore(
        np.vstack([sample.u_minus.matrix, sample.u_plus.matrix]),
        normalized=True,
        temperature=sample.u_minus.temperature,
        modality="text",
    )


def mean_task(sample) -> hftt.TaskEmbeddings:
    """A one-anchor task: the ensembled mean of the in-distribution texts."""
    return hftt.build_task_embeddings([("in_concepts", sample.u_minus.matrix)])
