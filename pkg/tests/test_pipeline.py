"""
Inference pipeline: gamma projection, input assembly, padding, prediction, tone mapping.
"""

import numpy as np
import pytest

from apps.core.domain.bracket import ExposureBracket
from apps.core.errors import BracketError, KernelError
from apps.core.services import cenhdr
from apps.core.services.pipeline import (
    assemble_inputs,
    gamma_project,
    mu_law,
    pad_to_even,
    predict,
    tonemap_8bit,
)


def bracket(rng, height=6, width=8, evs=(-2.0, 0.0, 2.0)):
    frames = tuple(rng.random((height, width, 3)).astype(np.float32) for _ in range(3))
    return ExposureBracket.from_evs(frames, evs, name="t")


def test_gamma_projection_values():
    ldr = np.array([[[0.5, 0.25, 1.0]]], dtype=np.float32)
    out = gamma_project(ldr, 4.0, 2.2)
    np.testing.assert_allclose(out, ldr.astype(np.float64) ** 2.2 / 4.0, rtol=1e-6)
    assert out.dtype == np.float32


def test_gamma_projection_reference_values():
    assert gamma_project(np.full((1, 1, 3), 0.5), 1.0)[0, 0, 0] == pytest.approx(0.21764, abs=1e-5)
    assert gamma_project(np.full((1, 1, 3), 0.25), 0.5)[0, 0, 0] == pytest.approx(0.09473, abs=1e-5)


def test_gamma_projection_rejects_non_positive_time():
    with pytest.raises(BracketError):
        gamma_project(np.ones((1, 1, 3)), 0.0)


def test_assemble_inputs_layout(rng):
    b = bracket(rng)
    assembled = assemble_inputs(b)
    assert len(assembled.tensors) == 3
    for frame, t, tensor in zip(b.ldr, b.exposure_times, assembled.tensors):
        assert tensor.shape == (1, 6, 6, 8)
        np.testing.assert_array_equal(tensor[0, :3], frame.transpose(2, 0, 1))
        np.testing.assert_allclose(tensor[0, 3:], gamma_project(frame, t).transpose(2, 0, 1))


def test_pad_to_even_reflects_last_row_and_column():
    raster = np.arange(3 * 5 * 1, dtype=np.float32).reshape(3, 5, 1)
    padded, bottom, right = pad_to_even(raster)
    assert (bottom, right) == (1, 1)
    assert padded.shape == (4, 6, 1)
    np.testing.assert_array_equal(padded[3, :5], raster[1])
    np.testing.assert_array_equal(padded[:3, 5], raster[:, 3])


def test_pad_to_even_single_row_uses_edge():
    raster = np.ones((1, 3, 3), dtype=np.float32)
    padded, _, _ = pad_to_even(raster)
    assert padded.shape == (2, 4, 3)


@pytest.mark.parametrize("height,width", [(6, 8), (7, 9), (5, 4)])
def test_predict_output_matches_bracket_size(tiny_config, rng, height, width):
    weights = cenhdr.build_model(tiny_config, seed=0)
    timings = {}
    hdr = predict(bracket(rng, height, width), weights, tiny_config, timings=timings)
    assert hdr.pixels.shape == (height, width, 3)
    assert {"assemble", "forward", "crop"} <= set(timings)


def test_predict_accepts_wider_ev_spacing(tiny_config, rng):
    weights = cenhdr.build_model(tiny_config, seed=0)
    assert predict(bracket(rng, evs=(-3.0, 0.0, 3.0)), weights, tiny_config).pixels.shape == (6, 8, 3)


def test_mu_law_and_8bit_tonemap():
    hdr = np.array([[[0.0, 1.0, 0.001]]])
    t = mu_law(hdr)
    assert t[0, 0, 0] == 0.0
    assert t[0, 0, 1] == pytest.approx(1.0)
    expected = np.log1p(5000 * 0.001) / np.log1p(5000)
    assert t[0, 0, 2] == pytest.approx(expected)
    q = tonemap_8bit(hdr)
    assert q.dtype == np.uint8
    assert q.tolist() == [[[0, 255, int(np.floor(255 * expected + 0.5))]]]


def test_mu_law_reference_value_and_gray_level():
    hdr = np.full((2, 2, 3), 0.01)
    assert mu_law(hdr)[0, 0, 0] == pytest.approx(0.46163, abs=1e-5)
    assert np.all(tonemap_8bit(hdr) == 118)


def test_mu_law_rejects_negative_values():
    with pytest.raises(KernelError):
        mu_law(np.array([[[-1.0, 0.0, 0.0]]]))
