"""Desk-scale video-LLM pipeline: encoder stub, STE, projector, answer scorer.

The forward path is ``encode -> [STE] -> project -> [STE] -> score``, with
STE layers placed according to the stack's insertion point. The decoder is
replaced by a tiny causal scorer: visual context is the order-invariant mean
of every token, so any sensitivity to frame order comes from the STE.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import ste
from . import tensor as T
from .errors import DimensionError, ContractError
from .rng import Rng
from .specstr import format_stack, parse_stack
from .tensor import Tensor

GROUPS = ("encoder", "ste", "projector", "scorer")

# stream ids keep each component's init independent of the others
_ENCODER_STREAM, _PROJECTOR_STREAM, _SCORER_STREAM, _STE_STREAM = 1, 2, 3, 16


@dataclass(frozen=True)
class PipelineConfig:
    d_raw: int = 8
    d_vis: int = 8
    d_sem: int = 8
    p: int = 4
    vocab: int = 5
    n_questions: int = 1
    stack: ste.StackSpec | None = None
    seed: int = 0
    ste_init: str = "scaled_uniform"
    projector_activation: str = "gelu"

    def __post_init__(self):
        for name in ("d_raw", "d_vis", "d_sem", "p", "vocab", "n_questions"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be >= 1")
        if self.projector_activation not in ("gelu", "none"):
            raise ContractError(
                f"projector_activation must be 'gelu' or 'none', "
                f"got {self.projector_activation!r}")
        if self.stack is not None:
            self.stack.check(self.d_vis, self.d_sem)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["stack"] = None if self.stack is None else format_stack(self.stack)
        out["activation"] = "none" if self.stack is None else self.stack.activation
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        raw = dict(raw)
        activation = raw.pop("activation", "none")
        insertion = raw.pop("insertion", None)
        stack = raw.get("stack")
        if isinstance(stack, str):
            text = stack
            if insertion and insertion != "before" and "@" not in text and "|" not in text:
                text += f"@{insertion}"
            raw["stack"] = parse_stack(text, activation)
        return cls(**raw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class ToyBatch:
    frames: np.ndarray  # (t, p, d_raw)
    question: int
    answer: tuple
    label: int | None = None

    def __post_init__(self):
        self.answer = tuple(int(a) for a in self.answer)
        if len(self.answer) < 1:
            raise ContractError("answer needs at least one token")


@dataclass
class Pipeline:
    config: PipelineConfig
    weights: dict = field(default_factory=dict)

    @classmethod
    def create(cls, config: PipelineConfig, dtype=np.float64) -> "Pipeline":
        return cls(config, init_pipeline_weights(config, dtype))

    @property
    def dtype(self):
        return next(iter(self.weights.values())).dtype

    def group(self, name: str) -> dict:
        return {k: v for k, v in self.weights.items() if k.split(".")[0] == name}

    def ste_weights(self, part: str) -> list[ste.LayerWeights]:
        out, i = [], 0
        while f"ste.{part}.{i}.kernel" in self.weights:
            out.append(ste.LayerWeights(self.weights[f"ste.{part}.{i}.kernel"],
                                        self.weights[f"ste.{part}.{i}.bias"]))
            i += 1
        return out

    def with_weights(self, updates: dict) -> "Pipeline":
        return Pipeline(self.config, {**self.weights, **updates})

    # -------------------------------------------------------------- stages

    def encode(self, raw) -> Tensor:
        return encode_frames(raw, self.weights["encoder.weight"],
                             self.weights["encoder.bias"])

    def temporal(self, z: Tensor, part: str) -> Tensor:
        stack = None if self.config.stack is None else self.config.stack.substack(part)
        if stack is None:
            return z
        return ste.stack_forward(z, stack, self.ste_weights(part))

    def project(self, z: Tensor) -> Tensor:
        w = self.weights
        return project(z, w["projector.w1"], w["projector.b1"],
                       w["projector.w2"], w["projector.b2"],
                       activation=self.config.projector_activation)

    def visual_tokens(self, raw) -> Tensor:
        z = self.temporal(self.encode(raw), "before")
        return self.temporal(self.project(z), "after")

    def score(self, h: Tensor, question: int, answer) -> Tensor:
        w = self.weights
        return score_answer(h, question, answer, w["scorer.tok_emb"],
                            w["scorer.q_emb"], w["scorer.w_out"], w["scorer.b_out"])

    def forward(self, batch: ToyBatch) -> Tensor:
        """Negative log-likelihood of the batch's answer."""
        h = self.visual_tokens(batch.frames)
        return T.scale(self.score(h, batch.question, batch.answer), -1.0)

    def frame_counts(self, t: int) -> dict:
        """Frames seen by the projector and by the scorer for ``t`` inputs."""
        stack = self.config.stack
        if stack is None:
            return {"projector": t, "scorer": t}
        before = stack.substack("before")
        t_proj = before.out_frames(t) if before else t
        after = stack.substack("after")
        return {"projector": t_proj, "scorer": after.out_frames(t_proj) if after else t_proj}


def encode_frames(raw, weight: Tensor, bias: Tensor) -> Tensor:
    """Per-token linear map from raw features to the visual width."""
    raw = raw if isinstance(raw, Tensor) else Tensor(raw, dtype=weight.dtype)
    if raw.ndim != 3 or raw.shape[2] != weight.shape[0]:
        raise DimensionError(
            f"raw frames {raw.shape} do not match encoder input width {weight.shape[0]}")
    t, p, _ = raw.shape
    x = T.reshape(raw, (t * p, weight.shape[0]))
    y = T.add(T.matmul(x, weight), bias)
    return T.reshape(y, (t, p, weight.shape[1]))


def project(z: Tensor, w1, b1, w2, b2, activation="gelu") -> Tensor:
    """Two-layer per-token MLP from visual to semantic width."""
    if z.ndim != 3 or z.shape[2] != w1.shape[0]:
        raise DimensionError(
            f"projector expects width {w1.shape[0]}, got embeddings {z.shape}")
    t, p, d = z.shape
    x = T.add(T.matmul(T.reshape(z, (t * p, d)), w1), b1)
    if activation == "gelu":
        x = T.gelu(x)
    x = T.add(T.matmul(x, w2), b2)
    return T.reshape(x, (t, p, w2.shape[1]))


def score_answer(h: Tensor, question: int, answer, tok_emb: Tensor, q_emb: Tensor,
                 w_out: Tensor, b_out: Tensor, per_position: bool = False):
    """Causal log-probability of ``answer`` given visual tokens and a question.

    Position ``i`` conditions on the pooled visual context, the question and
    the previous answer token (a start token at ``i = 0``).
    """
    vocab = w_out.shape[1]
    answer = [int(a) for a in answer]
    if not answer:
        raise ContractError("answer needs at least one token")
    bad = [a for a in answer if not 0 <= a < vocab]
    if bad:
        raise ContractError(f"tokens {bad} outside vocabulary of size {vocab}")
    if not 0 <= question < q_emb.shape[0]:
        raise ContractError(f"question id {question} out of range")
    ctx = T.pooled_mean(h, axes=(0, 1))
    prev = [vocab] + answer[:-1]
    state = T.add(T.take(tok_emb, prev, axis=0), ctx)
    state = T.add(state, T.reshape(T.take(q_emb, [question], axis=0), (-1,)))
    logits = T.add(T.matmul(T.tanh(state), w_out), b_out)
    logp = T.log_softmax(logits)
    flat = [i * vocab + a for i, a in enumerate(answer)]
    terms = T.take(T.reshape(logp, (-1,)), flat, axis=0)
    return terms if per_position else T.sum(terms)


def init_pipeline_weights(config: PipelineConfig, dtype=np.float64) -> dict:
    rng = Rng(config.seed)
    c = config
    w = {}

    def uniform(r, shape, fan_in):
        s = np.sqrt(1.0 / fan_in)
        return Tensor(r.uniform(-s, s, shape, dtype), requires_grad=True)

    r = rng.child(_ENCODER_STREAM)
    w["encoder.weight"] = uniform(r, (c.d_raw, c.d_vis), c.d_raw)
    w["encoder.bias"] = Tensor(np.zeros(c.d_vis, dtype), requires_grad=True)
    r = rng.child(_PROJECTOR_STREAM)
    w["projector.w1"] = uniform(r, (c.d_vis, c.d_sem), c.d_vis)
    w["projector.b1"] = uniform(r, (c.d_sem,), c.d_vis)
    w["projector.w2"] = uniform(r, (c.d_sem, c.d_sem), c.d_sem)
    w["projector.b2"] = uniform(r, (c.d_sem,), c.d_sem)
    r = rng.child(_SCORER_STREAM)
    w["scorer.tok_emb"] = Tensor(r.normal((c.vocab + 1, c.d_sem), 0.5, dtype),
                                 requires_grad=True)
    w["scorer.q_emb"] = Tensor(r.normal((c.n_questions, c.d_sem), 0.5, dtype),
                               requires_grad=True)
    w["scorer.w_out"] = uniform(r, (c.d_sem, c.vocab), c.d_sem)
    w["scorer.b_out"] = Tensor(np.zeros(c.vocab, dtype), requires_grad=True)
    if c.stack is not None:
        for part, width in (("before", c.d_vis), ("after", c.d_sem)):
            sub = c.stack.substack(part)
            if sub is None:
                continue
            ste_rng = rng.child(_STE_STREAM + (0 if part == "before" else 1))
            layers = ste.init_stack(sub, width, c.ste_init, ste_rng, dtype)
            for i, lw in enumerate(layers):
                w[f"ste.{part}.{i}.kernel"] = lw.kernel
                w[f"ste.{part}.{i}.bias"] = lw.bias
    return w


def identity_projector(pipe: Pipeline) -> Pipeline:
    """Replace projector weights by identities (needs d_vis == d_sem)."""
    c = pipe.config
    if c.d_vis != c.d_sem:
        raise ContractError("identity projector needs d_vis == d_sem")
    dt = pipe.dtype
    eye = np.eye(c.d_vis, dtype=dt)
    zero = np.zeros(c.d_vis, dtype=dt)
    return pipe.with_weights({
        "projector.w1": Tensor(eye, requires_grad=True),
        "projector.b1": Tensor(zero, requires_grad=True),
        "projector.w2": Tensor(eye, requires_grad=True),
        "projector.b2": Tensor(zero, requires_grad=True)})
