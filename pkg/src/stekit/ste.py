"""Stackable temporal encoder.

A layer with frame ratio ``(t_u:t_o)`` pads the video by repeating its last
frame until the length divides into units of ``t_u`` frames, then runs
``n = t_u / t_s`` window slides per unit (windows wrap around inside the
unit). Each slide maps a flattened ``t_w x d`` window to ``c = t_o * d / n``
channels with one kernel shared by every patch. Concatenating the ``n``
slide outputs gives ``t_o * d`` values per patch, read back as ``t_o``
abstract frames of width ``d``.

Frame embeddings are rank-3 tensors laid out ``(frames, patches, dim)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tensor as T
from .errors import ContractError, DimensionError, SpecError
from .rng import Rng
from .tensor import Tensor

INSERTIONS = ("before", "after", "both")
ACTIVATIONS = ("none", "tanh")
INIT_MODES = ("identity_preserving", "scaled_uniform")


@dataclass(frozen=True)
class LayerSpec:
    t_u: int
    t_o: int
    t_w: int = 2
    t_s: int = 1

    @property
    def n(self) -> int:
        """Window slides per unit."""
        return self.t_u // self.t_s

    def channels(self, d: int) -> int:
        return self.t_o * d // self.n

    def out_frames(self, t: int) -> int:
        return (t + pad_amount(t, self.t_u)) * self.t_o // self.t_u

    def params(self, d: int) -> int:
        c = self.channels(d)
        return c * self.t_w * d + c


def validate(spec: LayerSpec, d: int) -> list[str]:
    """Every violated constraint for ``spec`` at width ``d``; empty when valid."""
    errors = []
    for name in ("t_u", "t_o", "t_w", "t_s"):
        v = getattr(spec, name)
        if not isinstance(v, (int, np.integer)) or v < 1:
            errors.append(f"{name} must be a positive integer, got {v!r}")
    if not isinstance(d, (int, np.integer)) or d < 1:
        errors.append(f"d must be a positive integer, got {d!r}")
    if errors:
        return errors
    if spec.t_w > spec.t_u:
        errors.append(f"t_w > t_u (t_w={spec.t_w}, t_u={spec.t_u})")
    if spec.t_u % spec.t_s:
        errors.append(f"t_u mod t_s != 0 (t_u={spec.t_u}, t_s={spec.t_s})")
    else:
        n = spec.n
        if (spec.t_o * d) % n:
            errors.append(f"t_o*d mod n != 0 (t_o={spec.t_o}, d={d}, n={n})")
    return errors


def check(spec: LayerSpec, d: int) -> None:
    errors = validate(spec, d)
    if errors:
        raise SpecError(errors)


@dataclass(frozen=True)
class StackSpec:
    """Ordered STE layers plus where they sit relative to the projector.

    With ``insertion="both"`` the first ``split`` layers run before the
    projector and the rest after it.
    """

    layers: tuple[LayerSpec, ...]
    insertion: str = "before"
    activation: str = "none"
    split: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        problems = []
        if not self.layers:
            problems.append("a stack needs at least one layer")
        if self.insertion not in INSERTIONS:
            problems.append(f"unknown insertion {self.insertion!r}")
        if self.activation not in ACTIVATIONS:
            problems.append(f"unknown activation {self.activation!r}")
        if self.insertion == "both":
            if self.split is None or not 1 <= self.split < len(self.layers):
                problems.append(
                    f"insertion 'both' needs 1 <= split < {len(self.layers)}, "
                    f"got {self.split}")
        elif self.split is not None:
            problems.append("split is only meaningful for insertion 'both'")
        if problems:
            raise SpecError(problems)

    @property
    def before(self) -> tuple[LayerSpec, ...]:
        if self.insertion == "before":
            return self.layers
        if self.insertion == "both":
            return self.layers[:self.split]
        return ()

    @property
    def after(self) -> tuple[LayerSpec, ...]:
        if self.insertion == "after":
            return self.layers
        if self.insertion == "both":
            return self.layers[self.split:]
        return ()

    def widths(self, d: int, d_after: int | None = None) -> list[int]:
        """Working width of each layer."""
        d_after = d if d_after is None else d_after
        return [d] * len(self.before) + [d_after] * len(self.after)

    def substack(self, part: str) -> "StackSpec | None":
        layers = self.before if part == "before" else self.after
        if not layers:
            return None
        return StackSpec(layers, activation=self.activation)

    def check(self, d: int, d_after: int | None = None) -> None:
        errors = []
        for i, (spec, w) in enumerate(zip(self.layers, self.widths(d, d_after))):
            errors += [f"layer {i}: {e}" for e in validate(spec, w)]
        if errors:
            raise SpecError(errors)

    def out_frames(self, t: int) -> int:
        for spec in self.layers:
            t = spec.out_frames(t)
        return t


@dataclass
class LayerWeights:
    kernel: Tensor  # (c, t_w * d)
    bias: Tensor  # (c,)

    @property
    def n_params(self) -> int:
        return self.kernel.size + self.bias.size

    def tensors(self) -> list[Tensor]:
        return [self.kernel, self.bias]


def pad_amount(t: int, t_u: int) -> int:
    """Replicated frames needed so that ``t + k`` is a multiple of ``t_u``.

    Zero when ``t`` already divides evenly.
    """
    return (t_u - t % t_u) % t_u


def pad_replicate(z: Tensor, t_u: int):
    """Append copies of the last frame; returns ``(padded, k)``."""
    if t_u < 1:
        raise ContractError(f"t_u must be >= 1, got {t_u}")
    t = z.shape[0]
    k = pad_amount(t, t_u)
    if k == 0:
        return z, 0
    idx = np.concatenate([np.arange(t), np.full(k, t - 1)])
    return T.take(z, idx, axis=0), k


def window_indices(spec: LayerSpec) -> np.ndarray:
    """Unit-local frame index for each (slide, window position), wrapping."""
    i = np.arange(spec.n)[:, None] * spec.t_s
    j = np.arange(spec.t_w)[None, :]
    return (i + j) % spec.t_u


def _slides_to_frames(y: Tensor, units: int, p: int, spec: LayerSpec, d: int):
    # slide-major: slide 0's c channels, then slide 1's, ...
    y = T.reshape(y, (units, p, spec.t_o, d))
    y = T.transpose(y, (0, 2, 1, 3))
    return T.reshape(y, (units * spec.t_o, p, d))


def layer_forward(z: Tensor, spec: LayerSpec, w: LayerWeights) -> Tensor:
    """One STE layer: ``(t, p, d) -> ((t + k) * t_o / t_u, p, d)``."""
    if z.ndim != 3:
        raise DimensionError(f"frame embeddings must be (t, p, d), got {z.shape}")
    t, p, d = z.shape
    check(spec, d)
    c, n = spec.channels(d), spec.n
    if w.kernel.shape != (c, spec.t_w * d) or w.bias.shape != (c,):
        raise DimensionError(
            f"weights {w.kernel.shape}/{w.bias.shape} do not fit width d={d}: "
            f"expected kernel {(c, spec.t_w * d)} and bias {(c,)}")
    zp, k = pad_replicate(z, spec.t_u)
    units = (t + k) // spec.t_u
    x = T.reshape(zp, (units, spec.t_u, p, d))
    x = T.take(x, window_indices(spec).reshape(-1), axis=1)
    x = T.reshape(x, (units, n, spec.t_w, p, d))
    x = T.transpose(x, (0, 3, 1, 2, 4))
    x = T.reshape(x, (units * p * n, spec.t_w * d))
    y = T.add(T.matmul(x, T.transpose(w.kernel, (1, 0))), w.bias)
    return _slides_to_frames(y, units, p, spec, d)


def stack_forward(z: Tensor, stack: StackSpec | Sequence[LayerSpec],
                  weights: Sequence[LayerWeights], activation: str | None = None):
    """Apply the layers in order, with the stack's activation between them."""
    if isinstance(stack, StackSpec):
        layers = stack.layers
        activation = activation or stack.activation
    else:
        layers = tuple(stack)
        activation = activation or "none"
    if len(layers) != len(weights):
        raise ContractError(
            f"{len(layers)} layers but {len(weights)} weight sets")
    for i, (spec, w) in enumerate(zip(layers, weights)):
        z = layer_forward(z, spec, w)
        if activation == "tanh" and i < len(layers) - 1:
            z = T.tanh(z)
    return z


@dataclass
class ParamCount:
    total: int
    per_layer: list[int] = field(default_factory=list)


def param_count(stack: StackSpec | Sequence[LayerSpec], d: int,
                d_after: int | None = None) -> ParamCount:
    if not isinstance(stack, StackSpec):
        stack = StackSpec(tuple(stack))
    stack.check(d, d_after)
    per = [spec.params(w) for spec, w in zip(stack.layers, stack.widths(d, d_after))]
    return ParamCount(sum(per), per)


def init_weights(spec: LayerSpec, d: int, mode: str = "scaled_uniform",
                 rng: Rng | None = None, dtype=np.float64,
                 requires_grad: bool = True) -> LayerWeights:
    """Fresh weights for one layer.

    ``identity_preserving`` copies the first ``t_s`` frames of each window
    through unchanged, so a ``t_o == t_u`` layer is the identity map.
    ``scaled_uniform`` draws from ``U(-s, s)`` with ``s = sqrt(1 / (t_w d))``.
    """
    check(spec, d)
    c = spec.channels(d)
    fan_in = spec.t_w * d
    if mode == "identity_preserving":
        if spec.t_o != spec.t_u:
            raise ContractError(
                f"identity init needs t_o == t_u, got ({spec.t_u}:{spec.t_o})")
        if spec.t_w < spec.t_s:
            raise ContractError(
                f"identity init needs t_w >= t_s, got t_w={spec.t_w}, t_s={spec.t_s}")
        kernel = np.zeros((c, fan_in), dtype=dtype)
        kernel[:, :c] = np.eye(c, dtype=dtype)
        bias = np.zeros(c, dtype=dtype)
    elif mode == "scaled_uniform":
        if rng is None:
            raise ContractError("scaled_uniform init needs an Rng")
        s = np.sqrt(1.0 / fan_in)
        kernel = rng.uniform(-s, s, (c, fan_in))
        bias = rng.uniform(-s, s, (c,))
        # the f32 cast may round onto the open bound
        lim = np.nextafter(np.asarray(s, dtype=dtype), np.dtype(dtype).type(0))
        kernel = np.clip(kernel.astype(dtype), -lim, lim)
        bias = np.clip(bias.astype(dtype), -lim, lim)
    else:
        raise ContractError(f"unknown init mode {mode!r}; expected one of {INIT_MODES}")
    return LayerWeights(Tensor(kernel, requires_grad=requires_grad),
                        Tensor(bias, requires_grad=requires_grad))


def init_stack(stack: StackSpec, d: int, mode: str = "scaled_uniform",
               rng: Rng | None = None, dtype=np.float64,
               d_after: int | None = None) -> list[LayerWeights]:
    stack.check(d, d_after)
    return [init_weights(spec, w, mode,
                         None if rng is None else rng.child(i), dtype)
            for i, (spec, w) in enumerate(zip(stack.layers, stack.widths(d, d_after)))]


def stack_backward(record: T.Tape, loss: Tensor, weights: Sequence[LayerWeights],
                   z: Tensor | None = None):
    """Gradients of ``loss`` for every layer's (kernel, bias) and the input."""
    wrt = [t for w in weights for t in w.tensors()]
    if z is not None:
        wrt.append(z)
    g = record.grad(loss, wrt)
    layers = [(g[w.kernel], g[w.bias]) for w in weights]
    return {"layers": layers, "input": g[z] if z is not None else None}
