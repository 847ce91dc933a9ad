import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from advkit import engine
from advkit.attack import (
    AttackConfig,
    TraceRecord,
    cost,
    imperceptibility_rescale,
    misclassification_step,
    one_hot,
    run_attack,
)
from advkit.errors import AlreadyTargetClassError, ShapeError
from advkit.metrics import PerceptualScores


# ---------------------------------------------------------------- cost

def test_cost_zero_iff_equal():
    y = one_hot(3, 10)
    assert cost(y, y) == 0.0


def test_cost_uniform_vs_onehot():
    a = np.full(10, 0.1)
    y = one_hot(0, 10)
    assert abs(cost(a, y) - 0.90) <= 1e-12


def test_cost_length_mismatch():
    with pytest.raises(ShapeError):
        cost(np.zeros(10), np.zeros(9))


@given(hnp.arrays(np.float64, 10, elements=st.floats(0, 1)),
       hnp.arrays(np.float64, 10, elements=st.floats(0, 1)))
@settings(max_examples=50, deadline=None)
def test_cost_matches_summation_oracle(a, y):
    oracle = sum((float(ai) - float(yi)) ** 2 for ai, yi in zip(a, y))
    assert abs(cost(a, y) - oracle) <= 1e-12


def test_one_hot_out_of_range():
    with pytest.raises(ShapeError):
        one_hot(10, 10)
    with pytest.raises(ShapeError):
        one_hot(-1, 10)


# ------------------------------------------- misclassification_step

def test_step_fixed_point_at_zero_gradient(mlp_tiny, probe_images):
    x = probe_images[0].astype(np.float64)
    trace = engine.forward(mlp_tiny, x)
    y = trace.output.copy()  # a_L == y -> zero gradient
    delta = np.zeros_like(x)
    delta2, _ = misclassification_step(mlp_tiny, x, delta, y, 0.01, (0.0, 1.0))
    assert np.array_equal(delta2, delta)


def test_step_decreases_cost_on_seeded_trials(mlp_tiny, probe_images):
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = probe_images[rng.integers(20)].astype(np.float64)
        y = one_hot(int(rng.integers(10)), 10)
        delta = rng.uniform(-1e-3, 1e-3, size=x.shape)
        c0 = cost(engine.forward(mlp_tiny, np.clip(x + delta, 0, 1)).output, y)
        _, trace = misclassification_step(mlp_tiny, x, delta, y, 0.01, (0.0, 1.0))
        if c0 > 1e-12:  # skip pathological already-converged draws
            assert cost(trace.output, y) < c0


def test_step_respects_clamp(cnn_tiny, probe_images):
    x = probe_images[0].astype(np.float64)
    y = one_hot(3, 10)
    delta = np.full_like(x, 0.5)  # push many pixels toward the hi bound
    delta2, _ = misclassification_step(cnn_tiny, x, delta, y, 10.0, (0.0, 1.0),
                                       normalize=True)
    adv = x + delta2
    assert np.all(adv >= 0.0) and np.all(adv <= 1.0)


# --------------------------------------- imperceptibility_rescale

def _delta(shape=(1, 4, 4), value=0.5):
    return np.full(shape, value)


def test_rescale_noop_when_gates_pass():
    d = _delta()
    out = imperceptibility_rescale(None, d, PerceptualScores(cr=1.0, ssi=1.0), 0.95, 0.99)
    assert np.array_equal(out, d)


def test_rescale_cr_gate_first():
    d = _delta()
    out = imperceptibility_rescale(None, d, PerceptualScores(cr=0.901, ssi=0.5), 0.95, 0.99)
    assert np.allclose(out, 0.099 * d)


def test_rescale_ssi_gate():
    d = _delta()
    out = imperceptibility_rescale(None, d, PerceptualScores(cr=0.96, ssi=0.8133), 0.95, 0.99)
    assert np.allclose(out, 0.1867 * d)


def test_rescale_shrinks_sup_norm():
    d = _delta(value=-0.3)
    out = imperceptibility_rescale(None, d, PerceptualScores(cr=0.5, ssi=0.5), 0.95, 0.99)
    assert np.max(np.abs(out)) <= np.max(np.abs(d))


def test_rescale_rejects_negative_score():
    with pytest.raises(ValueError):
        imperceptibility_rescale(None, _delta(), PerceptualScores(cr=-0.1, ssi=0.5), 0.95, 0.99)


# ------------------------------------------------------- run_attack

@pytest.fixture(scope="module")
def attacked(cnn_tiny, probe_images):
    x = probe_images[0].astype(np.float64)
    pred, _ = engine.predict(cnn_tiny, x)
    config = AttackConfig(target_class=(pred + 3) % 10, init_delta_scale=0.05,
                          max_outer_iters=100)
    return x, config, run_attack(cnn_tiny, x, config)


def test_attack_succeeds_with_all_gates(attacked):
    _, config, report = attacked
    assert report.success
    final = report.trace[-1]
    assert final.cost <= config.epsilon
    assert final.cr >= config.cr_min
    assert final.ssi >= config.ssi_min
    assert final.predicted_class == config.target_class
    assert final.target_confidence >= 0.9


def test_attack_image_within_clamp(attacked):
    _, _, report = attacked
    adv = report.final_adversarial_image
    assert np.all(adv >= 0.0) and np.all(adv <= 1.0)
    assert adv.dtype == np.float32


def test_attack_confidence_does_not_degrade(attacked):
    # every convergence already pins confidence near 1, so we assert
    # non-degradation within a small tolerance rather than strict growth
    _, config, report = attacked
    confs = [r.target_confidence for r in report.trace if r.cost <= config.epsilon]
    assert confs[-1] >= confs[0] - 0.05


def test_attack_trace_counters_monotone(attacked):
    _, _, report = attacked
    outers = [r.outer_iter for r in report.trace]
    inners = [r.inner_iters_total for r in report.trace]
    assert outers == list(range(1, len(outers) + 1))
    assert inners == sorted(inners)
    assert report.outer_iters_run == len(report.trace)


def test_attack_report_round_trips_as_json(attacked):
    _, _, report = attacked
    payload = json.loads(json.dumps(report.to_dict()))
    assert payload["success"] is True
    assert len(payload["trace"]) == report.outer_iters_run
    assert set(payload["trace"][0]) == {f.name for f in
                                        TraceRecord.__dataclass_fields__.values()}


def test_attack_deterministic(cnn_tiny, attacked):
    x, config, report = attacked
    again = run_attack(cnn_tiny, x, config)
    assert json.dumps(report.to_dict()) == json.dumps(again.to_dict())
    assert np.array_equal(report.final_adversarial_image, again.final_adversarial_image)
    assert np.array_equal(report.final_perturbation, again.final_perturbation)


def test_attack_rejects_target_equal_prediction(cnn_tiny, probe_images):
    x = probe_images[0].astype(np.float64)
    pred, _ = engine.predict(cnn_tiny, x)
    with pytest.raises(AlreadyTargetClassError):
        run_attack(cnn_tiny, x, AttackConfig(target_class=pred))


def test_attack_zero_outer_budget(cnn_tiny, probe_images):
    x = probe_images[1].astype(np.float64)
    pred, _ = engine.predict(cnn_tiny, x)
    report = run_attack(cnn_tiny, x, AttackConfig(target_class=(pred + 1) % 10,
                                                  max_outer_iters=0))
    assert not report.success
    assert report.trace == []


def test_attack_shape_mismatch(cnn_tiny):
    with pytest.raises(ShapeError):
        run_attack(cnn_tiny, np.zeros((1, 14, 14)), AttackConfig(target_class=0))
