"""
Merging network graph.

    L_1, L_2, L_3 (n, 6, H, W)
        │ encode (shared conv_E1 → relu → conv_E2 stride 2)
        ▼
    S_i (16, H, W), F_i (32, H/2, W/2)
        │ attention on frames 1 and 3 (reference F_2 passes through)
        ▼
    F'_i (32, H/2, W/2)
        │ merge (conv_M1 per frame, conv_M2 over non-reference pair, conv_M3, conv_M4)
        ▼
    M (64, H/2, W/2)
        │ decode (pixel shuffle ×2, + S_2, conv_D, sigmoid)
        ▼
    HDR (3, H, W)

Stage functions take and return autodiff Variables, so the same code runs
inference (untaped) and training (parameters watched on a Tape). `params`
may be a ModelWeights instance (bound untaped on the fly) or a mapping of
Variables returned by `bind()`.

Usage:
    weights = build_model(ModelConfig(), seed=0)
    hdr = forward(l1, l2, l3, weights, ModelConfig())      # ndarray (n, 3, H, W)
"""

from typing import Dict, List, Mapping, MutableMapping, Optional, Sequence, Tuple, Union

import numpy as np

from apps.core.config import AttentionVariant, ModelConfig
from apps.core.domain.weights import ModelWeights
from apps.core.errors import DimensionError, KernelError, ShapeDisagreementError
from apps.core.kernels import autodiff as ad
from apps.core.kernels.autodiff import Tape, Variable

Params = Union[ModelWeights, Mapping[str, Variable]]
TensorLike = Union[np.ndarray, Variable]

SCRAM_VARIANTS = (
    AttentionVariant.SCRAM,
    AttentionVariant.SCRAM_SPATIAL_ONLY,
    AttentionVariant.SCRAM_CHANNEL_ONLY,
)
SPATIAL_PARTS = ("reduce", "dil1", "dil2", "dil3")
CHANNEL_PARTS = ("fc1", "fc2", "fc3", "fc4")
SCRAM_DILATION = 2


# ─── Weight layout ──────────────────────────────────────────────────────────

def attention_frame_keys(config: ModelConfig) -> Tuple[str, ...]:
    return ("shared",) if config.scram_shared_across_frames else ("1", "3")


def _frame_key(config: ModelConfig, frame: int) -> str:
    if frame not in (1, 3):
        raise KernelError(f"attention is only applied to frames 1 and 3, got frame {frame}")
    return "shared" if config.scram_shared_across_frames else str(frame)


def _conv_shapes(name: str, c_out: int, c_in: int, k: int) -> Dict[str, Tuple[int, ...]]:
    return {f"{name}.weight": (c_out, c_in, k, k), f"{name}.bias": (c_out,)}


def _linear_shapes(name: str, c_out: int, c_in: int) -> Dict[str, Tuple[int, ...]]:
    return {f"{name}.weight": (c_out, c_in), f"{name}.bias": (c_out,)}


def expected_shapes(config: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    """Every parameter name the configuration needs, with its exact shape."""
    e1, e2 = config.encoder_widths
    m = config.merge_width
    a = config.attention_width
    cs = config.scram_spatial_channels
    h1, h2, h3 = config.scram_hidden

    shapes: Dict[str, Tuple[int, ...]] = {}
    shapes.update(_conv_shapes("conv_E1", e1, 6, 3))
    shapes.update(_conv_shapes("conv_E2", e2, e1, 3))

    variant = config.attention
    for key in attention_frame_keys(config):
        if variant in (AttentionVariant.SCRAM, AttentionVariant.SCRAM_SPATIAL_ONLY):
            base = f"scram.{key}.spatial"
            shapes.update(_conv_shapes(f"{base}.reduce", cs, a, 1))
            for part in ("dil1", "dil2", "dil3"):
                shapes.update(_conv_shapes(f"{base}.{part}", cs, cs, 3))
            shapes.update(_conv_shapes(f"{base}.project", 1, cs, 1))
        if variant in (AttentionVariant.SCRAM, AttentionVariant.SCRAM_CHANNEL_ONLY):
            base = f"scram.{key}.channel"
            widths = (a, h1, h2, h3, e2)
            for i, part in enumerate(CHANNEL_PARTS):
                shapes.update(_linear_shapes(f"{base}.{part}", widths[i + 1], widths[i]))
        if variant == AttentionVariant.AHDRNET_LIKE:
            shapes.update(_conv_shapes(f"attention.{key}.conv1", a, a, 3))
            shapes.update(_conv_shapes(f"attention.{key}.conv2", e2, a, 3))

    if config.conv_m1_shared:
        shapes.update(_conv_shapes("conv_M1", m, e2, 3))
    else:
        for frame in (1, 2, 3):
            shapes.update(_conv_shapes(f"conv_M1.{frame}", m, e2, 3))
    shapes.update(_conv_shapes("conv_M2", m, 2 * m, 3))
    shapes.update(_conv_shapes("conv_M3", m, m, 3))
    shapes.update(_conv_shapes("conv_M4", m, m, 3))
    shapes.update(_conv_shapes("conv_D", 3, m // config.upscale ** 2, 3))
    return shapes


def build_model(config: ModelConfig, seed: int) -> ModelWeights:
    """Kaiming-uniform (fan-in) weights, zero biases, drawn in sorted-name order."""
    rng = np.random.default_rng(seed)
    tensors: Dict[str, np.ndarray] = {}
    for name, shape in sorted(expected_shapes(config).items()):
        if name.endswith(".bias"):
            tensors[name] = np.zeros(shape, dtype=np.float32)
            continue
        fan_in = int(np.prod(shape[1:]))
        bound = np.sqrt(6.0 / fan_in)
        tensors[name] = rng.uniform(-bound, bound, size=shape).astype(np.float32)
    return ModelWeights(tensors)


def validate_weights(weights: ModelWeights, config: ModelConfig) -> None:
    """
    Raises:
        ShapeDisagreementError: a required tensor is missing, extra, or mis-shaped
    """
    expected = expected_shapes(config)
    problems: List[str] = []
    for name, shape in expected.items():
        if name not in weights:
            problems.append(f"missing {name}")
        elif weights[name].shape != shape:
            problems.append(f"{name} has shape {weights[name].shape}, expected {shape}")
    for name in weights.names():
        if name not in expected:
            problems.append(f"unexpected tensor {name}")
    if problems:
        raise ShapeDisagreementError("weights do not match configuration: " + "; ".join(problems))


def bind(weights: ModelWeights, tape: Optional[Tape] = None) -> Dict[str, Variable]:
    """Wrap every tensor as a Variable; with a tape, each becomes a watched parameter."""
    if tape is None:
        return {name: Variable(weights[name], name=name) for name in weights.names()}
    return {name: tape.watch(weights[name], name) for name in weights.names()}


def _params(params: Params) -> Mapping[str, Variable]:
    return bind(params) if isinstance(params, ModelWeights) else params


def _var(x: TensorLike) -> Variable:
    return x if isinstance(x, Variable) else Variable(x)


def _conv(params: Mapping[str, Variable], name: str, x: Variable, stride: int = 1,
          padding: int = 1, dilation: int = 1) -> Variable:
    try:
        weight, bias = params[f"{name}.weight"], params[f"{name}.bias"]
    except KeyError as exc:
        raise KernelError(f"weights have no layer {name!r}") from exc
    return ad.conv2d(x, weight, bias, stride=stride, padding=padding, dilation=dilation)


def _linear(params: Mapping[str, Variable], name: str, x: Variable) -> Variable:
    try:
        weight, bias = params[f"{name}.weight"], params[f"{name}.bias"]
    except KeyError as exc:
        raise KernelError(f"weights have no layer {name!r}") from exc
    return ad.linear(x, weight, bias)


# ─── Stages ─────────────────────────────────────────────────────────────────

def encode(l_i: TensorLike, params: Params) -> Tuple[Variable, Variable]:
    """(n, 6, H, W) → S_i (n, 16, H, W) and F_i (n, 32, H/2, W/2)."""
    x, p = _var(l_i), _params(params)
    if x.value.ndim == 4:
        height, width = x.shape[2:]
        if height % 2:
            raise DimensionError(
                f"input height {height} is odd; pad to even dimensions first "
                "(assemble_inputs does this)", axis="height",
            )
        if width % 2:
            raise DimensionError(
                f"input width {width} is odd; pad to even dimensions first "
                "(assemble_inputs does this)", axis="width",
            )
    s = ad.relu(_conv(p, "conv_E1", x))
    f = _conv(p, "conv_E2", s, stride=2)
    return s, f


def spatial_branch(x: Variable, params: Params, prefix: str) -> Variable:
    """(n, 64, h, w) → (n, 1, h, w) pre-activation spatial map."""
    p = _params(params)
    y = ad.relu(_conv(p, f"{prefix}.spatial.reduce", x, padding=0))
    for part in ("dil1", "dil2", "dil3"):
        y = ad.relu(_conv(p, f"{prefix}.spatial.{part}", y,
                          padding=SCRAM_DILATION, dilation=SCRAM_DILATION))
    return _conv(p, f"{prefix}.spatial.project", y, padding=0)


def channel_branch(x: Variable, params: Params, prefix: str) -> Variable:
    """(n, 64, h, w) → (n, 32, 1, 1) pre-activation channel vector."""
    p = _params(params)
    y = ad.global_avg_pool(x)
    for part in ("fc1", "fc2", "fc3"):
        y = ad.relu(_linear(p, f"{prefix}.channel.{part}", y))
    return _linear(p, f"{prefix}.channel.fc4", y)


def scram(
    f_i: TensorLike,
    f_ref: TensorLike,
    params: Params,
    frame: int,
    config: Optional[ModelConfig] = None,
) -> Variable:
    """Reference attention mask A_i for non-reference frame 1 or 3, values in (0, 1)."""
    config = config or ModelConfig()
    fi, fr, p = _var(f_i), _var(f_ref), _params(params)
    if fi.shape != fr.shape:
        raise DimensionError(
            f"frame features {fi.shape} and reference features {fr.shape} differ",
            axis=_mismatch_axis(fi.shape, fr.shape),
        )
    prefix = f"scram.{_frame_key(config, frame)}"
    x = ad.concat_channels([fi, fr])
    variant = config.attention
    if variant == AttentionVariant.SCRAM:
        s = ad.expand(spatial_branch(x, p, prefix), fi.shape)
        return ad.sigmoid(ad.add(s, channel_branch(x, p, prefix)))
    if variant == AttentionVariant.SCRAM_SPATIAL_ONLY:
        return ad.sigmoid(ad.expand(spatial_branch(x, p, prefix), fi.shape))
    if variant == AttentionVariant.SCRAM_CHANNEL_ONLY:
        return ad.sigmoid(ad.expand(channel_branch(x, p, prefix), fi.shape))
    raise KernelError(f"scram() does not implement attention variant {variant.value!r}")


def ahdrnet_attention(
    f_i: TensorLike,
    f_ref: TensorLike,
    params: Params,
    frame: int,
    config: Optional[ModelConfig] = None,
) -> Variable:
    """Two 3×3 convolutions over the concatenated features, sigmoid mask."""
    config = config or ModelConfig()
    fi, fr, p = _var(f_i), _var(f_ref), _params(params)
    prefix = f"attention.{_frame_key(config, frame)}"
    x = ad.concat_channels([fi, fr])
    y = ad.relu(_conv(p, f"{prefix}.conv1", x))
    return ad.sigmoid(_conv(p, f"{prefix}.conv2", y))


def apply_attention(f_i: TensorLike, a_i: TensorLike) -> Variable:
    """F'_i = F_i ⊙ A_i."""
    fi, ai = _var(f_i), _var(a_i)
    if fi.shape != ai.shape:
        raise DimensionError(
            f"features {fi.shape} and attention mask {ai.shape} differ",
            axis=_mismatch_axis(fi.shape, ai.shape),
        )
    return ad.mul(fi, ai)


def attend(f_i: Variable, f_ref: Variable, params: Params, frame: int,
           config: ModelConfig) -> Variable:
    """F'_i for a non-reference frame under the configured attention variant."""
    variant = config.attention
    if variant == AttentionVariant.NONE:
        return f_i
    if variant == AttentionVariant.AHDRNET_LIKE:
        return apply_attention(f_i, ahdrnet_attention(f_i, f_ref, params, frame, config))
    return apply_attention(f_i, scram(f_i, f_ref, params, frame, config))


def merge(
    f1: TensorLike,
    f2: TensorLike,
    f3: TensorLike,
    params: Params,
    config: Optional[ModelConfig] = None,
) -> Variable:
    """Three (n, 32, h, w) feature maps → M (n, 64, h, w)."""
    config = config or ModelConfig()
    p = _params(params)
    frames = [_var(f) for f in (f1, f2, f3)]
    for i, f in enumerate(frames[1:], start=2):
        if f.shape != frames[0].shape:
            raise DimensionError(
                f"merge input {i} has shape {f.shape}, input 1 has {frames[0].shape}",
                axis=_mismatch_axis(frames[0].shape, f.shape),
            )
    names = ["conv_M1"] * 3 if config.conv_m1_shared else [f"conv_M1.{i}" for i in (1, 2, 3)]
    m1, m2, m3 = (ad.relu(_conv(p, name, f)) for name, f in zip(names, frames))
    m_nonref = ad.relu(_conv(p, "conv_M2", ad.concat_channels([m1, m3])))
    m = ad.relu(_conv(p, "conv_M3", ad.add(m2, m_nonref)))
    return ad.relu(_conv(p, "conv_M4", m))


def decode(m: TensorLike, s_ref: TensorLike, params: Params, upscale: int = 2,
           capture: Optional[MutableMapping[str, np.ndarray]] = None) -> Variable:
    """M (n, 64, h, w) and S_2 (n, 16, 2h, 2w) → HDR (n, 3, 2h, 2w) in (0, 1)."""
    p = _params(params)
    d = ad.pixel_shuffle(_var(m), upscale)
    s = _var(s_ref)
    if d.shape != s.shape:
        raise DimensionError(
            f"shuffled features {d.shape} do not match reference skip {s.shape}",
            axis=_mismatch_axis(d.shape, s.shape),
        )
    if capture is not None:
        capture["D"] = d.value
    return ad.sigmoid(_conv(p, "conv_D", ad.add(d, s)))


def forward_graph(
    inputs: Sequence[TensorLike],
    params: Params,
    config: ModelConfig,
    capture: Optional[MutableMapping[str, np.ndarray]] = None,
) -> Variable:
    """
    End-to-end graph on three assembled inputs.

    `capture`, when given, receives the intermediate tensors S_2, F_1..F_3,
    F'_1..F'_3, M and D (as arrays) for inspection.
    """
    if len(inputs) != 3:
        raise KernelError(f"forward needs three inputs, got {len(inputs)}")
    p = _params(params)
    xs = [_var(x) for x in inputs]
    for i, x in enumerate(xs[1:], start=2):
        if x.shape != xs[0].shape:
            raise DimensionError(
                f"input {i} has shape {x.shape}, input 1 has {xs[0].shape}",
                axis=_mismatch_axis(xs[0].shape, x.shape),
            )

    encoded = [encode(x, p) for x in xs]
    s = [e[0] for e in encoded]
    f = [e[1] for e in encoded]
    f_prime = [
        attend(f[0], f[1], p, 1, config),
        f[1],
        attend(f[2], f[1], p, 3, config),
    ]
    m = merge(*f_prime, p, config)
    hdr = decode(m, s[1], p, config.upscale, capture)

    if capture is not None:
        capture["S_2"] = s[1].value
        for i in range(3):
            capture[f"F_{i + 1}"] = f[i].value
            capture[f"F'_{i + 1}"] = f_prime[i].value
        capture["M"] = m.value
    return hdr


def forward(
    l1: np.ndarray,
    l2: np.ndarray,
    l3: np.ndarray,
    weights: ModelWeights,
    config: ModelConfig,
    capture: Optional[MutableMapping[str, np.ndarray]] = None,
) -> np.ndarray:
    """Inference: three (n, 6, H, W) arrays → (n, 3, H, W) HDR array."""
    return forward_graph((l1, l2, l3), weights, config, capture).value


def _mismatch_axis(a: Tuple[int, ...], b: Tuple[int, ...]) -> str:
    axes = ("batch", "channels", "height", "width")
    if len(a) != len(b):
        return "rank"
    for i, (da, db) in enumerate(zip(a, b)):
        if da != db:
            return axes[i] if i < len(axes) else "rank"
    return "rank"
