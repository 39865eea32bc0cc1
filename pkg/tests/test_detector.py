import numpy as np
import pytest
from sklearn.base import clone

import hftt
from hftt import HFTTDetector, TrainConfig, ValidationError, train
from conftest import mean_task, union_corpus


@pytest.fixture(scope="module")
def fitted(small_fixture):
    detector = HFTTDetector(seed=42)
    detector.fit(union_corpus(small_fixture), small_fixture.u_minus, mean_task(small_fixture))
    return detector


class TestEstimatorApi:
    def test_get_params_round_trips_through_set_params(self):
        detector = HFTTDetector(gamma=2.0, seed=5)
        params = detector.get_params()
        assert params["gamma"] == 2.0
        other = HFTTDetector().set_params(**params)
        assert other.get_params() == params

    def test_clone_copies_parameters_not_state(self, fitted):
        cloned = clone(fitted)
        assert cloned.get_params() == fitted.get_params()
        assert not hasattr(cloned, "model_")

    def test_unfitted_detectors_refuse_to_score(self):
        with pytest.raises(ValidationError, match="not fitted"):
            HFTTDetector().score_samples(np.eye(4))

    def test_fit_requires_all_three_inputs(self, small_fixture):
        with pytest.raises(ValidationError, match="fit needs"):
            HFTTDetector().fit(union_corpus(small_fixture))


class TestFitAndScore:
    def test_fit_matches_the_functional_trainer_bit_for_bit(self, small_fixture, fitted):
        report = train(
            TrainConfig(seed=42),
            mean_task(small_fixture),
            small_fixture.u_minus,
            union_corpus(small_fixture),
        )
        assert np.array_equal(fitted.model_.trainable, report.model.trainable)

    def test_scores_are_probabilities(self, fitted, small_fixture):
        p = fitted.score_samples(small_fixture.v_plus.matrix)
        assert p.shape == (small_fixture.v_plus.count,)
        assert np.all((p > 0.0) & (p < 1.0))

    def test_decision_function_is_centered(self, fitted, small_fixture):
        X = small_fixture.v_minus.matrix[:50]
        assert np.array_equal(
            fitted.decision_function(X), fitted.score_samples(X) - 0.5
        )

    def test_predict_separates_the_image_modes(self, fitted, small_fixture):
        # The fixed p > 0.5 cut is not calibrated for the image clouds, so
        # the in-mode is judged by its gap to the out-mode, not by accuracy.
        out_labels = fitted.predict(small_fixture.v_plus.matrix)
        in_labels = fitted.predict(small_fixture.v_minus.matrix)
        assert set(np.unique(out_labels)) <= {-1, 1}
        assert np.array_equal(
            in_labels,
            np.where(fitted.decision_function(small_fixture.v_minus.matrix) > 0, 1, -1),
        )
        assert (out_labels == 1).mean() > 0.9
        assert (in_labels == 1).mean() < (out_labels == 1).mean() - 0.3

    def test_fit_accepts_raw_matrices(self, small_fixture):
        detector = HFTTDetector(seed=1, temperature=0.01)
        detector.fit(
            union_corpus(small_fixture).matrix,
            small_fixture.u_minus.matrix,
            mean_task(small_fixture).embeddings,
        )
        p = detector.score_samples(small_fixture.v_plus.matrix[:10])
        assert p.shape == (10,)

    def test_empty_input_scores_to_an_empty_vector(self, fitted):
        assert fitted.score_samples(np.empty((0, 64))).shape == (0,)

    def test_same_seed_refits_identically(self, small_fixture, fitted):
        again = clone(fitted).fit(
            union_corpus(small_fixture), small_fixture.u_minus, mean_task(small_fixture)
        )
        assert np.array_equal(again.model_.trainable, fitted.model_.trainable)
