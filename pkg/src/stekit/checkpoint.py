"""Checkpoints for STE stacks and full pipelines."""

from __future__ import annotations

from .errors import FormatError
from .pipeline import Pipeline, PipelineConfig
from .specstr import format_stack, parse_stack
from .ste import LayerWeights, StackSpec
from .tensorio import load_checkpoint, save_checkpoint


def save_stack(path, stack: StackSpec, weights, d: int) -> None:
    tensors = {}
    for i, w in enumerate(weights):
        tensors[f"layer{i}.kernel"] = w.kernel
        tensors[f"layer{i}.bias"] = w.bias
    save_checkpoint(path, tensors, {"kind": "ste_stack", "stack": format_stack(stack),
                                    "activation": stack.activation, "d": d})


def load_stack(path):
    """Return ``(stack, weights, d)``."""
    header, tensors = load_checkpoint(path)
    if header.get("kind") != "ste_stack":
        raise FormatError(f"{path}: field 'kind' is {header.get('kind')!r}, expected 'ste_stack'")
    try:
        stack = parse_stack(header["stack"], header.get("activation", "none"))
    except KeyError:
        raise FormatError(f"{path}: header lacks field 'stack'") from None
    weights = []
    for i in range(len(stack.layers)):
        try:
            weights.append(LayerWeights(tensors[f"layer{i}.kernel"], tensors[f"layer{i}.bias"]))
        except KeyError as exc:
            raise FormatError(f"{path}: missing tensor {exc.args[0]}") from None
    return stack, weights, header.get("d")


def save_pipeline(path, pipeline: Pipeline, extra: dict | None = None) -> None:
    header = {"kind": "pipeline", "config": pipeline.config.to_dict()}
    header.update(extra or {})
    save_checkpoint(path, pipeline.weights, header)


def load_pipeline(path) -> Pipeline:
    header, tensors = load_checkpoint(path)
    if header.get("kind") != "pipeline":
        raise FormatError(f"{path}: field 'kind' is {header.get('kind')!r}, expected 'pipeline'")
    config = PipelineConfig.from_dict(header["config"])
    for t in tensors.values():
        t.requires_grad = True
    return Pipeline(config, tensors)
