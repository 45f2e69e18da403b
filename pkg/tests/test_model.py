# Tests for the fusion network, its attention block and attention traces
import math

import numpy as np
import pytest

from autodiff.gradcheck import numerical_gradient, relative_error
from autodiff.ops import per_sample_rmse
from autodiff.tensor import Tape
from common.errors import ConfigError
from geogrid.types import DepthGrid
from model.attention import (
    attention_trace,
    export_trace,
    mean_received,
    quartile_summary,
    read_trace_matrices,
    received_attention,
)
from model.config import ModelConfig, ModelParams
from model.init import glorot_bound, init_params
from model.network import (
    attention_head,
    forward,
    forward_pass,
    loss_and_gradients,
    multi_head,
    tokenize,
    untokenize,
)


def random_input(config, n=None, seed=0):
    rng = np.random.default_rng(seed)
    shape = (config.H, 6, 8) if n is None else (n, config.H, 6, 8)
    return rng.standard_normal(shape)


def head_tensors(tape, Xe, Wq, Wk, Wv):
    return (
        tape.constant(np.asarray(Xe, dtype=float)),
        tape.constant(np.asarray(Wq, dtype=float)),
        tape.constant(np.asarray(Wk, dtype=float)),
        tape.constant(np.asarray(Wv, dtype=float)),
    )


def test_tokenize_preserves_slab_values():
    x = np.arange(2 * 6 * 8, dtype=float).reshape(2, 6, 8)
    tokens = tokenize(x)
    assert tokens.shape == (2, 48)
    assert tokens[1].tolist() == x[1].ravel().tolist()
    np.testing.assert_array_equal(untokenize(tokens), x)


def test_tokenize_full_depth_input():
    assert tokenize(np.zeros((1976, 6, 8))).shape == (1976, 48)
    with pytest.raises(ConfigError):
        tokenize(np.zeros((4, 8, 6)))


def test_single_token_attends_to_itself():
    tape = Tape()
    out, weights = attention_head(
        *head_tensors(tape, [[2.0, -1.0]], np.eye(2), np.eye(2), [[1.0], [3.0]])
    )
    assert weights.data.tolist() == [[1.0]]
    assert out.data.tolist() == [[-1.0]]


def test_identical_tokens_get_uniform_weights():
    rng = np.random.default_rng(1)
    token = rng.standard_normal(4)
    tape = Tape()
    _, weights = attention_head(
        *head_tensors(
            tape,
            np.tile(token, (5, 1)),
            rng.standard_normal((4, 3)),
            rng.standard_normal((4, 3)),
            rng.standard_normal((4, 2)),
        )
    )
    np.testing.assert_allclose(weights.data, 0.2, rtol=0, atol=1e-15)


def test_two_token_hand_case():
    # first token scores the keys (1, 1 + ln 3), a softmax of [0.25, 0.75]
    a = 1.0 + math.log(3.0)
    tape = Tape()
    out, weights = attention_head(
        *head_tensors(tape, [[1.0], [a]], [[1.0]], [[1.0]], [[1.0]])
    )
    np.testing.assert_allclose(weights.data[0], [0.25, 0.75], rtol=0, atol=1e-15)
    assert out.data[0, 0] == pytest.approx(0.25 + 0.75 * a, abs=1e-14)

    second = 1.0 / (1.0 + math.exp(-a * math.log(3.0)))
    np.testing.assert_allclose(weights.data[1], [1 - second, second], atol=1e-15)
    expected = np.array([0.25 + 1 - second, 0.75 + second]) / 2
    np.testing.assert_allclose(
        received_attention(weights.data[None]), expected, rtol=0, atol=1e-15
    )


def test_one_head_with_identity_output_projection():
    config = ModelConfig(
        H=4, n_heads=1, d_k=3, d_v=3, conv_filters=2, adaptive_pool=(1, 1)
    )
    rng = np.random.default_rng(2)
    tape = Tape()
    Xe = tape.constant(rng.standard_normal((4, 3)))
    params = {
        "attn.q.0": tape.constant(rng.standard_normal((3, 3))),
        "attn.k.0": tape.constant(rng.standard_normal((3, 3))),
        "attn.v.0": tape.constant(rng.standard_normal((3, 3))),
        "attn.o": tape.constant(np.eye(3)),
    }
    mixed, _ = multi_head(Xe, params, config)
    single, _ = attention_head(
        Xe, params["attn.q.0"], params["attn.k.0"], params["attn.v.0"]
    )
    np.testing.assert_array_equal(mixed.data, single.data)


def test_multi_head_is_permutation_equivariant(tiny_config):
    rng = np.random.default_rng(3)
    values = {
        name: rng.standard_normal(shape)
        for name, shape in tiny_config.parameter_shapes().items()
        if name.startswith("attn.")
    }
    Xe = rng.standard_normal((tiny_config.H, tiny_config.d_model))
    perm = rng.permutation(tiny_config.H)

    def run(tokens):
        tape = Tape()
        params = {k: tape.constant(v) for k, v in values.items()}
        out, weights = multi_head(tape.constant(tokens), params, tiny_config)
        return out.data, weights

    base, weights = run(Xe)
    permuted, _ = run(Xe[perm])
    assert base.shape == (tiny_config.H, tiny_config.d_model)
    np.testing.assert_allclose(permuted, base[perm], rtol=0, atol=1e-12)
    for w in weights:
        np.testing.assert_allclose(w.data.sum(axis=-1), 1.0, rtol=0, atol=1e-12)


def test_default_width_is_256():
    config = ModelConfig(H=1976)
    assert config.d_model == 256
    assert config.parameter_shapes()["attn.o"] == (256, 256)


def test_zero_parameters_predict_the_output_bias(tiny_config):
    shapes = tiny_config.parameter_shapes()
    params = ModelParams({name: np.zeros(shape) for name, shape in shapes.items()})
    params.values["fc.b"] = np.linspace(1490.0, 1530.0, tiny_config.H)
    pred = forward(random_input(tiny_config), params, tiny_config)
    np.testing.assert_array_equal(pred, params["fc.b"])


def test_tiny_forward_shape_and_purity(tiny_config):
    params = init_params(tiny_config, seed=1)
    x = random_input(tiny_config)
    first = forward(x, params, tiny_config)
    assert first.shape == (8,)
    assert np.isfinite(first).all()
    assert forward(x, params, tiny_config).tobytes() == first.tobytes()
    batch = forward(random_input(tiny_config, n=3), params, tiny_config)
    assert batch.shape == (3, 8)


def test_cnn_variant_matches_attention_with_silent_block(tiny_config):
    attn = init_params(tiny_config, seed=4)
    attn.values["attn.o"] = np.zeros_like(attn["attn.o"])
    cnn_config = tiny_config.with_variant("cnn")
    cnn = ModelParams(
        {name: attn[name].copy() for name in cnn_config.parameter_shapes()}
    )
    x = random_input(tiny_config, n=2, seed=5)
    np.testing.assert_array_equal(
        forward(x, attn, tiny_config), forward(x, cnn, cnn_config)
    )


def test_forward_rejects_mismatched_params(tiny_config):
    params = init_params(tiny_config.with_variant("cnn"), seed=0)
    with pytest.raises(ConfigError):
        forward(random_input(tiny_config), params, tiny_config)
    with pytest.raises(ConfigError):
        forward(np.zeros((7, 6, 8)), init_params(tiny_config, 0), tiny_config)


def test_full_model_gradients_match_finite_differences(tiny_config):
    rng = np.random.default_rng(6)
    params = init_params(tiny_config, seed=2)
    for name, value in params.values.items():
        if value.ndim == 1:
            params.values[name] = rng.uniform(-0.1, 0.1, size=value.shape)
    x = random_input(tiny_config, n=2, seed=7)
    y = rng.standard_normal((2, tiny_config.H))

    _, analytic = loss_and_gradients(x, y, params, tiny_config)

    def batch_loss():
        return float(per_sample_rmse(forward(x, params, tiny_config), y).mean())

    for name, value in params.values.items():
        numeric = numerical_gradient(batch_loss, value, h=1e-5)
        assert relative_error(analytic[name], numeric) <= 1e-4, name


def test_batch_loss_is_mean_of_sample_losses(tiny_config):
    params = init_params(tiny_config, seed=3)
    x = random_input(tiny_config, n=3, seed=8)
    y = np.random.default_rng(9).standard_normal((3, tiny_config.H))
    value, _ = loss_and_gradients(x, y, params, tiny_config)
    singles = [
        loss_and_gradients(x[i], y[i], params, tiny_config)[0] for i in range(3)
    ]
    assert value == pytest.approx(np.mean(singles), rel=1e-12)


def test_parameter_count_hand_formula(tiny_config):
    D, H, C = 8, 8, 4
    embed = 48 * D + D
    heads = 2 * (3 * D * 4)
    output = 2 * 4 * D
    conv = 2 * 2 * C + C
    fc = 2 * 2 * C * H + H
    assert tiny_config.parameter_count() == embed + heads + output + conv + fc
    cnn = tiny_config.with_variant("cnn")
    assert cnn.parameter_count() == embed + conv + fc
    assert cnn.parameter_count() < tiny_config.parameter_count()
    assert init_params(tiny_config, 0).count() == tiny_config.parameter_count()


def test_init_is_seeded_and_bounded(tiny_config):
    a = init_params(tiny_config, seed=11)
    b = init_params(tiny_config, seed=11)
    c = init_params(tiny_config, seed=12)
    for name in a.names():
        assert a[name].tobytes() == b[name].tobytes()
        if a[name].ndim == 1:
            assert (a[name] == 0.0).all()
        else:
            assert np.abs(a[name]).max() <= glorot_bound(a[name].shape)
    assert a["fc.W"].tobytes() != c["fc.W"].tobytes()


def test_model_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(H=8, variant="rnn")
    with pytest.raises(ConfigError):
        ModelConfig(H=8, n_heads=2, d_k=4, d_v=4, conv_filters=4)
    config = ModelConfig(
        H=8, n_heads=2, d_k=4, d_v=4, conv_filters=4, adaptive_pool=(2, 2)
    )
    assert ModelConfig.from_dict(config.to_dict()) == config
    with pytest.raises(ConfigError):
        ModelConfig.from_dict({**config.to_dict(), "dropout": 0.1})


def test_trace_of_identical_tokens_is_uniform(tiny_config):
    params = init_params(tiny_config, seed=0)
    slab = np.random.default_rng(1).standard_normal((1, 6, 8))
    x = np.broadcast_to(slab, (8, 6, 8))
    trace = attention_trace(x, params, tiny_config)
    assert trace.heads.shape == (2, 8, 8)
    np.testing.assert_allclose(trace.received, 1 / 8, rtol=0, atol=1e-12)


def test_trace_weights_are_normalised(tiny_config):
    params = init_params(tiny_config, seed=5)
    trace = attention_trace(random_input(tiny_config, seed=6), params, tiny_config)
    np.testing.assert_allclose(trace.heads.sum(axis=-1), 1.0, rtol=0, atol=1e-12)
    assert trace.received.sum() == pytest.approx(1.0, abs=1e-9)


def test_trace_needs_the_attention_variant(tiny_config):
    cnn = tiny_config.with_variant("cnn")
    with pytest.raises(ConfigError):
        attention_trace(random_input(cnn), init_params(cnn, 0), cnn)


def test_trace_export_round_trip(tmp_path, tiny_config):
    params = init_params(tiny_config, seed=5)
    traces = [
        attention_trace(random_input(tiny_config, seed=s), params, tiny_config)
        for s in range(3)
    ]
    received = mean_received(traces)
    assert received.sum() == pytest.approx(1.0, abs=1e-12)
    grid = DepthGrid(5.0, 12.0, 1.0)
    csv_path = export_trace(
        tmp_path / "trace.csv", tmp_path / "trace.bin", traces[0], grid, received
    )
    text = csv_path.read_text().splitlines()
    assert text[0] == "depth_m,weight"
    assert len(text) == 9
    back = read_trace_matrices(tmp_path / "trace.bin")
    np.testing.assert_array_equal(back.heads, traces[0].heads)


def test_quartile_summary():
    received = np.array([0.4, 0.3, 0.2, 0.1])
    summary = quartile_summary(received)
    assert summary["shallow_quartile_mean"] == 0.4
    assert summary["deep_quartile_mean"] == 0.1
    assert summary["shallow_dominates"] is True


def test_forward_pass_exposes_head_weights(tiny_config):
    params = init_params(tiny_config, 0)
    fp = forward_pass(random_input(tiny_config), params, tiny_config)
    assert len(fp.attention) == tiny_config.n_heads
    assert fp.prediction.shape == (tiny_config.H,)
