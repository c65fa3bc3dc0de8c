"""
Merging network: weight layout, stage shapes, composition and variants.
"""

import numpy as np
import pytest

from apps.core.config import AttentionVariant, ModelConfig
from apps.core.domain.weights import ModelWeights
from apps.core.errors import DimensionError, ShapeDisagreementError
from apps.core.kernels import autodiff as ad
from apps.core.services import cenhdr


def inputs(rng, n=1, height=8, width=10, dtype=np.float32):
    return [rng.random((n, 6, height, width)).astype(dtype) for _ in range(3)]


# ─── Layout ─────────────────────────────────────────────────────────────────

def test_default_parameter_count(default_config):
    weights = cenhdr.build_model(default_config, seed=0)
    assert weights.param_count == 280_237


def test_default_layer_shapes(default_config):
    shapes = cenhdr.expected_shapes(default_config)
    assert shapes["conv_E1.weight"] == (16, 6, 3, 3)
    assert shapes["conv_E2.weight"] == (32, 16, 3, 3)
    assert shapes["scram.1.spatial.reduce.weight"] == (21, 64, 1, 1)
    assert shapes["scram.3.channel.fc4.weight"] == (32, 120)
    assert shapes["conv_M2.weight"] == (64, 128, 3, 3)
    assert shapes["conv_D.weight"] == (3, 16, 3, 3)
    assert "scram.shared.spatial.reduce.weight" not in shapes


def test_build_model_is_seed_deterministic(tiny_config):
    a = cenhdr.build_model(tiny_config, seed=7)
    b = cenhdr.build_model(tiny_config, seed=7)
    c = cenhdr.build_model(tiny_config, seed=8)
    assert a.equals(b)
    assert not a.equals(c)
    assert all(not a[n].any() for n in a.names() if n.endswith(".bias"))


def test_validate_weights_reports_missing_and_misshaped(tiny_config):
    weights = cenhdr.build_model(tiny_config, seed=0)
    tensors = weights.as_dict()
    tensors["conv_E1.weight"] = np.zeros((4, 6, 5, 5), np.float32)
    del tensors["conv_D.bias"]
    with pytest.raises(ShapeDisagreementError) as exc:
        cenhdr.validate_weights(ModelWeights(tensors), tiny_config)
    assert "conv_E1.weight" in str(exc.value)
    assert "conv_D.bias" in str(exc.value)


# ─── Stages ─────────────────────────────────────────────────────────────────

def test_stage_shapes(default_config, rng):
    weights = cenhdr.build_model(default_config, seed=0)
    l1, l2, l3 = inputs(rng, height=8, width=12)
    capture = {}
    out = cenhdr.forward(l1, l2, l3, weights, default_config, capture=capture)
    assert out.shape == (1, 3, 8, 12)
    assert capture["S_2"].shape == (1, 16, 8, 12)
    for i in (1, 2, 3):
        assert capture[f"F_{i}"].shape == (1, 32, 4, 6)
        assert capture[f"F'_{i}"].shape == (1, 32, 4, 6)
    assert capture["M"].shape == (1, 64, 4, 6)
    assert capture["D"].shape == (1, 16, 8, 12)
    assert np.all((out > 0) & (out < 1))


def test_reference_features_pass_through_attention(tiny_config, rng):
    weights = cenhdr.build_model(tiny_config, seed=0)
    capture = {}
    cenhdr.forward(*inputs(rng), weights, tiny_config, capture=capture)
    assert np.array_equal(capture["F_2"], capture["F'_2"])
    assert not np.array_equal(capture["F_1"], capture["F'_1"])


def test_forward_equals_stage_composition(tiny_config, rng):
    weights = cenhdr.build_model(tiny_config, seed=3)
    l1, l2, l3 = inputs(rng)
    s1, f1 = cenhdr.encode(l1, weights)
    s2, f2 = cenhdr.encode(l2, weights)
    s3, f3 = cenhdr.encode(l3, weights)
    a1 = cenhdr.scram(f1, f2, weights, 1, tiny_config)
    a3 = cenhdr.scram(f3, f2, weights, 3, tiny_config)
    m = cenhdr.merge(cenhdr.apply_attention(f1, a1), f2, cenhdr.apply_attention(f3, a3), weights, tiny_config)
    hdr = cenhdr.decode(m, s2, weights)
    assert np.array_equal(hdr.value, cenhdr.forward(l1, l2, l3, weights, tiny_config))


def test_scram_mask_in_open_unit_interval(tiny_config, rng):
    weights = cenhdr.build_model(tiny_config, seed=0)
    f = rng.standard_normal((2, 8, 3, 4)).astype(np.float32)
    mask = cenhdr.scram(f, f * 2, weights, 1, tiny_config).value
    assert mask.shape == f.shape
    assert np.all((mask > 0) & (mask < 1))


def test_batch_elements_are_independent(tiny_config, rng):
    weights = cenhdr.build_model(tiny_config, seed=0)
    batch = inputs(rng, n=2)
    out = cenhdr.forward(*batch, weights, tiny_config)
    single = cenhdr.forward(*[x[1:] for x in batch], weights, tiny_config)
    np.testing.assert_allclose(out[1:], single, rtol=1e-6)


def test_odd_input_asks_for_padding(tiny_config, rng):
    weights = cenhdr.build_model(tiny_config, seed=0)
    with pytest.raises(DimensionError) as exc:
        cenhdr.forward(*inputs(rng, height=7), weights, tiny_config)
    assert exc.value.axis == "height"
    assert "pad" in str(exc.value)


def test_mismatched_inputs_rejected(tiny_config, rng):
    weights = cenhdr.build_model(tiny_config, seed=0)
    l1, l2, _ = inputs(rng)
    with pytest.raises(DimensionError) as exc:
        cenhdr.forward(l1, l2, rng.random((1, 6, 8, 12)).astype(np.float32), weights, tiny_config)
    assert exc.value.axis == "width"


def test_forward_rejects_wrong_channel_count(tiny_config, rng):
    weights = cenhdr.build_model(tiny_config, seed=0)
    bad = [rng.random((1, 5, 8, 8)).astype(np.float32) for _ in range(3)]
    with pytest.raises(DimensionError) as exc:
        cenhdr.forward(*bad, weights, tiny_config)
    assert exc.value.axis == "channels"


# ─── Variants ───────────────────────────────────────────────────────────────

@pytest.mark.parametrize("variant", list(AttentionVariant))
def test_every_attention_variant_runs(tiny_config, rng, variant):
    config = tiny_config.model_copy(update={"attention": variant})
    weights = cenhdr.build_model(config, seed=0)
    out = cenhdr.forward(*inputs(rng), weights, config)
    assert out.shape == (1, 3, 8, 10)
    assert np.all(np.isfinite(out))


def test_no_attention_variant_has_no_attention_weights(tiny_config):
    config = tiny_config.model_copy(update={"attention": AttentionVariant.NONE})
    names = cenhdr.build_model(config, seed=0).names()
    assert not [n for n in names if n.startswith(("scram.", "attention."))]


def test_shared_attention_and_unshared_merge_layout(tiny_config):
    config = tiny_config.model_copy(update={"scram_shared_across_frames": True, "conv_m1_shared": False})
    shapes = cenhdr.expected_shapes(config)
    assert "scram.shared.channel.fc1.weight" in shapes
    assert "scram.1.channel.fc1.weight" not in shapes
    assert {"conv_M1.1.weight", "conv_M1.2.weight", "conv_M1.3.weight"} <= set(shapes)


def test_ahdrnet_like_attention_parameter_count(default_config):
    config = default_config.model_copy(update={"attention": AttentionVariant.AHDRNET_LIKE})
    shapes = cenhdr.expected_shapes(config)
    per_frame = sum(int(np.prod(s)) for n, s in shapes.items() if n.startswith("attention.1."))
    assert per_frame == 55_392


# ─── End-to-end gradient ────────────────────────────────────────────────────

def test_end_to_end_gradient_matches_finite_difference(rng):
    config = ModelConfig(encoder_widths=(1, 2), merge_width=4, scram_spatial_channels=1, scram_hidden=(2, 2, 2))
    weights = cenhdr.build_model(config, seed=1).as_dict()
    weights = ModelWeights({k: v.astype(np.float64) + 0.05 for k, v in weights.items()})
    l1, l2, l3 = inputs(rng, height=4, width=4, dtype=np.float64)
    target = rng.random((1, 3, 4, 4))

    def loss_of(w: ModelWeights) -> float:
        return float(np.abs(cenhdr.forward(l1, l2, l3, w, config) - target).mean())

    tape = ad.Tape()
    params = cenhdr.bind(weights, tape)
    pred = cenhdr.forward_graph((l1, l2, l3), params, config)
    grads = ad.backward(tape, ad.l1_loss(pred, tape.constant(target)))

    eps = 1e-6
    for name in ("conv_E1.weight", "scram.1.channel.fc2.weight", "scram.3.spatial.dil2.bias", "conv_D.bias"):
        flat_index = 0
        base = weights.as_dict()
        idx = np.unravel_index(flat_index, base[name].shape)
        plus, minus = weights.as_dict(), weights.as_dict()
        plus[name][idx] += eps
        minus[name][idx] -= eps
        numeric = (loss_of(ModelWeights(plus)) - loss_of(ModelWeights(minus))) / (2 * eps)
        assert grads[name][idx] == pytest.approx(numeric, rel=1e-4, abs=1e-8)
