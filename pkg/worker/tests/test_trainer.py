import math

import pytest

from peftbo_worker.trainer import (
    DEFAULT_MAX_STEPS,
    MockTrainer,
    WorkerConfig,
    mock_train,
    trainable_param_count,
)


@pytest.fixture(scope="module")
def trainer():
    return MockTrainer()


def _cfg(layers, d_sa, d_pa, l_pt):
    return WorkerConfig.from_dict(
        {"layers": layers, "d_sa": d_sa, "d_pa": d_pa, "l_pt": l_pt}
    )


class TestWorkerConfig:
    def test_parses_text_form(self):
        cfg = _cfg([3, 1], 12, 96, 1)
        assert cfg.layers == (1, 3)
        assert cfg.num_active == 2
        assert cfg.size_sum == 109

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            _cfg([1, 1], 0, 0, 0)
        with pytest.raises(ValueError):
            _cfg([0], 0, 0, 0)
        with pytest.raises(ValueError):
            _cfg([1], -1, 0, 0)
        with pytest.raises((KeyError, ValueError)):
            WorkerConfig.from_dict({"layers": [1]})


class TestCounting:
    def test_counting_rule(self):
        assert trainable_param_count(_cfg([3, 4, 8, 9, 10], 12, 96, 1), 768) == 837_120
        assert trainable_param_count(_cfg([], 0, 0, 0), 16) == 0

    def test_instantiated_modules_match_rule(self, trainer):
        for layers, sizes in [
            ([1], (4, 0, 0)),
            ([1, 2], (12, 6, 2)),
            ([2, 5, 7], (0, 3, 1)),
        ]:
            cfg = _cfg(layers, *sizes)
            _, _, count = trainer.train(cfg, 0.01, 0)
            assert count == trainable_param_count(cfg, trainer.hidden_dim)


class TestTraining:
    def test_deterministic_given_config_fidelity_seed(self, trainer):
        cfg = _cfg([1, 3], 12, 6, 2)
        a, _, _ = trainer.train(cfg, 0.05, 7)
        b, _, _ = trainer.train(cfg, 0.05, 7)
        assert a == b

    def test_different_seed_changes_init(self, trainer):
        cfg = _cfg([1, 3], 12, 6, 2)
        a, _, _ = trainer.train(cfg, 0.02, 7)
        b, _, _ = trainer.train(cfg, 0.02, 8)
        assert a != b

    def test_zero_sizes_score_equals_untrained_baseline(self, trainer):
        cfg = _cfg([1, 2], 0, 0, 0)
        score, steps, count = trainer.train(cfg, 1.0, 3)
        assert steps == 0 and count == 0
        assert score == trainer.baseline_score(cfg)

    def test_step_count_contract(self, trainer):
        cfg = _cfg([1], 4, 0, 0)
        _, steps_low, _ = trainer.train(cfg, 0.05, 0)
        _, steps_full, _ = trainer.train(cfg, 1.0, 0)
        assert steps_low == math.ceil(0.05 * DEFAULT_MAX_STEPS) == 20
        assert steps_full == DEFAULT_MAX_STEPS == 400
        assert steps_full == 20 * steps_low

    def test_score_in_range_and_training_helps(self, trainer):
        cfg = _cfg([1, 2, 3], 16, 16, 2)
        trained, _, _ = trainer.train(cfg, 1.0, 5)
        baseline = trainer.baseline_score(cfg)
        assert 0.0 <= trained <= 100.0
        assert trained > baseline

    def test_mock_train_wrapper(self, trainer):
        cfg = _cfg([1], 2, 2, 1)
        assert mock_train(cfg, 0.02, 1, trainer) == trainer.train(cfg, 0.02, 1)[0]

    def test_fidelity_validation(self, trainer):
        with pytest.raises(ValueError):
            trainer.steps_for(0.0)
        with pytest.raises(ValueError):
            trainer.steps_for(1.5)
