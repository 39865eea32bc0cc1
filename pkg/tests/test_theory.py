import numpy as np
import pytest

import hftt
from hftt import (
    BimodalConfig,
    ConvergenceWarning,
    NumericalError,
    ValidationError,
    alignment_margins,
    closed_form_classifier,
    default_bimodal_config,
    fit_quadratic_classifier,
    normalize_rows,
    random_bimodal_config,
    sample_bimodal,
    verify_corollary,
)


def make_config(**overrides):
    values = dict(
        dim=4,
        samples_per_class=50,
        mean_u_minus=np.eye(4)[0],
        mean_u_plus=np.eye(4)[1],
        mean_v_minus=normalize_rows(np.array([1.0, 0.0, 0.5, 0.0])),
        mean_v_plus=normalize_rows(np.array([0.0, 1.0, 0.0, 0.5])),
        noise_scale=0.2,
        seed=0,
    )
    values.update(overrides)
    return BimodalConfig(**values)


class TestBimodalConfig:
    def test_valid_config_passes(self):
        make_config()

    def test_rejects_non_unit_means(self):
        with pytest.raises(ValidationError, match="norm"):
            make_config(mean_u_minus=np.array([2.0, 0.0, 0.0, 0.0]))

    def test_rejects_violated_alignment(self):
        # v+ leaning toward u- breaks the transfer assumption.
        with pytest.raises(ValidationError, match="alignment"):
            make_config(mean_v_plus=normalize_rows(np.array([1.0, 0.0, 0.0, 0.5])))

    def test_rejects_negative_noise(self):
        with pytest.raises(ValidationError, match="noise"):
            make_config(noise_scale=-0.1)

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            make_config(mean_u_plus=np.array([0.0, 1.0, 0.0]))

    def test_default_config_margins(self):
        config = default_bimodal_config()
        plus, minus = alignment_margins(config)
        expected = 1.0 / np.sqrt(1.25)
        assert plus == pytest.approx(expected, abs=1e-12)
        assert minus == pytest.approx(expected, abs=1e-12)

    def test_default_config_needs_four_dimensions(self):
        with pytest.raises(ValidationError, match="at least 4"):
            default_bimodal_config(dim=3)

    def test_random_configs_are_valid_with_healthy_margins(self):
        for seed in range(25):
            config = random_bimodal_config(seed, dim=16, samples_per_class=10)
            plus, minus = alignment_margins(config)
            assert plus >= 0.2 and minus >= 0.2
            for mean in (config.mean_u_minus, config.mean_u_plus,
                         config.mean_v_minus, config.mean_v_plus):
                assert np.linalg.norm(mean) == pytest.approx(1.0, abs=1e-9)


class TestSampleBimodal:
    def test_shapes_modalities_and_unit_rows(self):
        sample = sample_bimodal(make_config(samples_per_class=40))
        for key, modality in (("u_minus", "text"), ("u_plus", "text"),
                              ("v_minus", "image"), ("v_plus", "image")):
            store = getattr(sample, key)
            assert store.matrix.shape == (40, 4)
            assert store.modality == modality
            assert store.normalized
            assert store.temperature == pytest.approx(0.01, rel=1e-6)

    def test_sampling_is_deterministic(self):
        a = sample_bimodal(make_config(seed=7))
        b = sample_bimodal(make_config(seed=7))
        assert a.u_plus.matrix.tobytes() == b.u_plus.matrix.tobytes()
        c = sample_bimodal(make_config(seed=8))
        assert not np.array_equal(a.u_plus.matrix, c.u_plus.matrix)

    def test_zero_noise_collapses_onto_the_means(self):
        config = make_config(noise_scale=0.0, samples_per_class=10)
        sample = sample_bimodal(config)
        assert np.allclose(sample.u_minus.matrix, config.mean_u_minus, atol=1e-7)
        assert np.allclose(sample.v_plus.matrix, config.mean_v_plus, atol=1e-7)

    def test_empirical_mean_direction_converges(self, default_fixture):
        config = default_fixture.config
        mean_dir = normalize_rows(default_fixture.u_plus.matrix.mean(axis=0))
        assert float(mean_dir @ config.mean_u_plus) >= 0.99


class TestClosedFormClassifier:
    def test_is_the_normalized_mean_difference(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a = rng.standard_normal(8)
            b = rng.standard_normal(8)
            theta = closed_form_classifier(a, b)
            expected = (b - a) / np.linalg.norm(b - a)
            assert np.array_equal(theta, expected)

    def test_rejects_coincident_means(self):
        v = np.ones(5)
        with pytest.raises(NumericalError, match="coincide"):
            closed_form_classifier(v, v)


class TestFitQuadraticClassifier:
    def test_recovers_the_axis_on_clean_data(self):
        # Two points per class, symmetric about the first axis, so the
        # optimum sits in a proper quadratic basin instead of a flat one.
        c, s = np.cos(np.pi / 6), np.sin(np.pi / 6)
        A = np.array([[-c, -s], [-c, s]])
        theta = fit_quadratic_classifier(A, -A, steps=300, lr=0.2, theta0=[0.6, 0.8])
        assert np.allclose(theta, [1.0, 0.0], atol=1e-6)

    def test_matches_the_closed_form_on_sampled_data(self):
        config = random_bimodal_config(3, dim=16, samples_per_class=2000, noise_scale=0.2)
        sample = sample_bimodal(config)
        fitted = fit_quadratic_classifier(sample.u_minus, sample.u_plus, steps=400, lr=0.2)
        closed = closed_form_classifier(
            sample.u_minus.matrix.mean(axis=0), sample.u_plus.matrix.mean(axis=0)
        )
        assert float(fitted @ closed) >= 0.999

    def test_zero_learning_rate_returns_the_initialization(self):
        A = normalize_rows(np.random.default_rng(0).standard_normal((50, 6)))
        B = normalize_rows(np.random.default_rng(1).standard_normal((50, 6)))
        theta0 = normalize_rows(np.arange(1.0, 7.0))
        with pytest.warns(ConvergenceWarning, match="stalled"):
            theta = fit_quadratic_classifier(A, B, steps=200, lr=0.0, theta0=theta0)
        assert np.allclose(theta, theta0, atol=1e-12)

    def test_short_runs_do_not_warn(self):
        A = np.array([[-1.0, 0.0]])
        B = np.array([[1.0, 0.0]])
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            fit_quadratic_classifier(A, B, steps=50, lr=0.0)

    def test_collapse_to_zero_is_a_numerical_error(self):
        # With identical single points the gradient points along theta, and a
        # quarter-sized step cancels it exactly.
        A = np.array([[1.0, 0.0]])
        B = np.array([[1.0, 0.0]])
        with pytest.raises(NumericalError, match="zero"):
            fit_quadratic_classifier(A, B, steps=10, lr=0.25, theta0=[1.0, 0.0])

    def test_rejects_empty_inputs(self):
        with pytest.raises(ValidationError):
            fit_quadratic_classifier(np.empty((0, 4)), np.eye(4))


class TestVerifyCorollary:
    def test_separated_modes_hold(self):
        theta = np.array([1.0, 0.0])
        report = verify_corollary(theta, [[-1.0, 0.0]], [[1.0, 0.0]])
        assert report.holds
        assert report.mean_minus == -1.0
        assert report.mean_plus == 1.0

    def test_swapped_modes_fail(self):
        theta = np.array([1.0, 0.0])
        report = verify_corollary(theta, [[1.0, 0.0]], [[-1.0, 0.0]])
        assert not report.holds

    def test_transfer_holds_on_the_stock_fixture(self, default_fixture):
        fitted = fit_quadratic_classifier(
            default_fixture.u_minus, default_fixture.u_plus, steps=400, lr=0.2
        )
        report = verify_corollary(fitted, default_fixture.v_minus, default_fixture.v_plus)
        assert report.holds
        assert report.mean_minus < -0.1
        assert report.mean_plus > 0.1
