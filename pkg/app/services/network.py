"""
Model assembly from layer tokens and the whole-model forward / backward passes.
"""
import logging
import re
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import DimensionError, StaleActivationError
from app.models.network import Activation, LayerKind, LayerSpec, Layout, Model, ParameterSet, Slot
from app.services import layers as L

logger = logging.getLogger(__name__)

PRESETS: Dict[str, Tuple[str, ...]] = {
    "gcnn1": ("LIN16", "RELU", "GC16", "AMP"),
    "gcnn2": ("LIN16", "RELU", "GC16", "AMP", "RELU", "FTM", "LIN16"),
    "gcnn3": (
        "LIN16", "RELU",
        "GC32", "AMP", "RELU",
        "GC64", "AMP", "RELU",
        "GC128", "AMP", "RELU",
        "LIN256", "LINREF", "SOFTMAX",
    ),
    "retrieval": ("LIN8", "GC8", "AMP", "COV"),
}

# Layer tokens: LIN<Q>, GC<Q>, FTM or FTM<kept>, LINREF (output size = reference vertex count)
_TOKEN = re.compile(r"^(LINREF|LIN|GC|FTM|RELU|AMP|COV|SOFTMAX)(\d*)$")


def preset_architecture(name: str) -> Tuple[str, ...]:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")


def parse_architecture(
    tokens: Sequence[str],
    input_dim: int,
    n_rho: int,
    n_theta: int,
    n_reference: Optional[int] = None,
    bias: bool = False,
) -> List[LayerSpec]:
    """Turn layer tokens into dimension-chained LayerSpecs."""
    specs: List[LayerSpec] = []
    dim = input_dim
    layout = Layout.POINT
    for position, raw in enumerate(tokens):
        match = _TOKEN.match(raw.strip().upper())
        if not match:
            raise ValueError(f"layer {position}: cannot parse token {raw!r}")
        name, number = match.group(1), match.group(2)
        size = int(number) if number else None
        if name in ("LIN", "GC") and not size:
            raise ValueError(f"layer {position}: {name} needs an output size, e.g. {name}16")
        if name in ("RELU", "AMP", "COV", "SOFTMAX", "LINREF") and size:
            raise ValueError(f"layer {position}: {name} takes no size")

        def require(expected: Layout) -> None:
            if layout is not expected:
                raise DimensionError(f"layer {position} ({raw}) expects a {expected.value} input, got {layout.value}")

        if name in ("LIN", "LINREF"):
            if layout is Layout.ROTATION:
                raise DimensionError(f"layer {position} ({raw}) cannot follow a rotation layer without AMP")
            if name == "LINREF":
                if not n_reference:
                    raise DimensionError(f"layer {position}: LINREF needs the reference vertex count")
                size = n_reference
            specs.append(LayerSpec(LayerKind.LIN, dim, size, bias=bias))
            dim = size
        elif name == "RELU":
            specs.append(LayerSpec(LayerKind.RELU, dim, dim))
        elif name == "GC":
            require(Layout.POINT)
            specs.append(LayerSpec(LayerKind.GC, dim, size, n_rho=n_rho, n_theta=n_theta))
            dim, layout = size, Layout.ROTATION
        elif name == "AMP":
            require(Layout.ROTATION)
            specs.append(LayerSpec(LayerKind.AMP, dim, dim))
            layout = Layout.POINT
        elif name == "FTM":
            require(Layout.POINT)
            kept = size or L.max_frequencies(n_theta)
            if kept > L.max_frequencies(n_theta):
                raise DimensionError(f"layer {position}: at most {L.max_frequencies(n_theta)} frequencies")
            out = n_rho * kept * dim
            specs.append(LayerSpec(LayerKind.FTM, dim, out, kept_freqs=kept, n_rho=n_rho, n_theta=n_theta))
            dim = out
        elif name == "COV":
            require(Layout.POINT)
            specs.append(LayerSpec(LayerKind.COV, dim, dim * dim))
            dim, layout = dim * dim, Layout.GLOBAL
        elif name == "SOFTMAX":
            if layout is Layout.ROTATION:
                raise DimensionError(f"layer {position}: SOFTMAX cannot follow a rotation layer without AMP")
            specs.append(LayerSpec(LayerKind.SOFTMAX, dim, dim))
    if layout is Layout.ROTATION:
        raise DimensionError("architecture ends on a rotation axis; add AMP")
    return specs


def glorot_init(specs: Sequence[LayerSpec], seed: int) -> ParameterSet:
    """Uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero."""
    slots: List[Slot] = []
    offset = 0
    for index, spec in enumerate(specs):
        for name, shape in spec.parameter_shapes():
            slots.append(Slot(index, name, offset, shape))
            offset += int(np.prod(shape))
    params = ParameterSet(slots)
    rng = np.random.default_rng(seed)
    for slot in slots:
        spec = specs[slot.layer]
        if slot.name == "bias":
            continue
        receptive = spec.n_rho * spec.n_theta if spec.kind is LayerKind.GC else 1
        limit = np.sqrt(6.0 / ((spec.in_dim + spec.out_dim) * receptive))
        params.view(slot.layer, slot.name)[...] = rng.uniform(-limit, limit, size=slot.shape)
    return params


def build_model(
    architecture: Sequence[str],
    input_dim: int,
    n_rho: int = 5,
    n_theta: int = 16,
    n_reference: Optional[int] = None,
    bias: bool = False,
    seed: int = 0,
) -> Model:
    specs = parse_architecture(architecture, input_dim, n_rho, n_theta, n_reference, bias)
    params = glorot_init(specs, seed)
    model = Model(
        architecture=tuple(architecture),
        layers=tuple(specs),
        params=params,
        input_dim=input_dim,
        n_rho=n_rho,
        n_theta=n_theta,
        n_reference=n_reference,
    )
    logger.debug("Built %s with %d parameters", "+".join(architecture) or "identity", params.size)
    return model


def _as_array(values) -> np.ndarray:
    return np.asarray(getattr(values, "values", values), dtype=np.float64)


def model_forward(model: Model, inputs) -> Tuple[np.ndarray, Activation]:
    """Run all layers on an (N, input_dim) field; accepts a DescriptorField or an array."""
    x = _as_array(inputs)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise DimensionError(f"model expects an (N, {model.input_dim}) input, got {x.shape}")
    params = model.params
    act = Activation(token=params.token())
    for index, spec in enumerate(model.layers):
        act.inputs.append(x)
        cache: Dict = {}
        if spec.kind is LayerKind.LIN:
            bias = params.view(index, "bias") if spec.bias else None
            x = L.lin_forward(x, params.view(index, "weight"), bias)
        elif spec.kind is LayerKind.RELU:
            x = L.relu_forward(x)
            cache["out"] = x
        elif spec.kind is LayerKind.GC:
            x, cache["patches"] = L.gc_forward(x, params.view(index, "filters"), model.patch_operator)
        elif spec.kind is LayerKind.AMP:
            cache["rotations"] = x.shape[1]
            x, cache["index"] = L.amp_forward(x)
        elif spec.kind is LayerKind.FTM:
            magnitudes, cache["spectrum"] = L.ftm_forward(x, model.patch_operator, spec.kept_freqs)
            x = magnitudes.reshape(magnitudes.shape[0], -1)
        elif spec.kind is LayerKind.COV:
            if model.areas is None:
                raise DimensionError("COV layer needs vertex areas bound to the model")
            vec, cache["centered"] = L.cov_forward(x, model.areas)
            x = vec[None, :]
        elif spec.kind is LayerKind.SOFTMAX:
            x = L.softmax_forward(x)
            cache["probs"] = x
        act.caches.append(cache)
    act.output = x
    return x, act


def model_backward(
    model: Model, activation: Activation, output_grad: np.ndarray, through_softmax: bool = True
) -> Tuple[np.ndarray, np.ndarray]:
    """Reverse pass; returns (parameter gradient vector, input gradient).

    With through_softmax=False a final SOFTMAX layer is skipped and output_grad is taken as the
    gradient with respect to its logits.
    """
    params = model.params
    if activation.token != params.token() or len(activation.caches) != len(model.layers):
        raise StaleActivationError("activation does not come from a forward pass with the current parameters")
    grads = np.zeros(params.size)
    g = np.asarray(output_grad, dtype=np.float64)
    if activation.output is not None and g.shape != activation.output.shape:
        raise DimensionError(f"output gradient shape {g.shape} differs from output {activation.output.shape}")

    for index in range(len(model.layers) - 1, -1, -1):
        spec = model.layers[index]
        x = activation.inputs[index]
        cache = activation.caches[index]
        if spec.kind is LayerKind.LIN:
            weight = params.view(index, "weight")
            g, g_weight, g_bias = L.lin_backward(x, weight, None, g)
            params.view(index, "weight", grads)[...] = g_weight
            if spec.bias:
                params.view(index, "bias", grads)[...] = g_bias
        elif spec.kind is LayerKind.RELU:
            g = L.relu_backward(cache["out"], g)
        elif spec.kind is LayerKind.GC:
            g, g_filters = L.gc_backward(params.view(index, "filters"), cache["patches"], g, model.patch_operator)
            params.view(index, "filters", grads)[...] = g_filters
        elif spec.kind is LayerKind.AMP:
            g = L.amp_backward(cache["index"], cache["rotations"], g)
        elif spec.kind is LayerKind.FTM:
            g = L.ftm_backward(cache["spectrum"], g.reshape(cache["spectrum"].shape), model.patch_operator)
        elif spec.kind is LayerKind.COV:
            g = L.cov_backward(cache["centered"], model.areas, g[0])
        elif spec.kind is LayerKind.SOFTMAX:
            if through_softmax or index != len(model.layers) - 1:
                g = L.softmax_backward(cache["probs"], g)
    return grads, g
