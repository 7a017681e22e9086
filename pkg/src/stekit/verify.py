"""Self-check suites behind ``stekit verify``.

Each suite returns a list of :class:`Check` results; the CLI prints one line
per check and fails if any did not pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ste
from .gradcheck import finite_diff, max_rel_error
from .pipeline import Pipeline, PipelineConfig
from .planner import plan
from .reference import reference_layer_forward
from .rng import Rng
from .specstr import parse_stack
from .tensor import Tape, Tensor
from .training import SyntheticTask, generate

# trainable-parameter column, rounded to two decimals of millions
PARAM_TABLE = [
    ("(2:2)", 2.65),
    ("(2:1)", 1.33),
    ("(2:1)-(2:1)", 2.65),
    ("(2:1)-(2:1)-(2:1)", 3.98),
    ("(2:1)-(2:1)-(2:1)-(2:1)", 5.31),
]
SEMANTIC_PARAMS_M = 25.69
VISUAL_WIDTH = 1152
SEMANTIC_WIDTH = 3584

LADDER = [
    ("(4:3)", 0.25),
    ("(4:3)-(4:3)", 0.4375),
    ("(2:1)", 0.50),
    ("(2:1)-(2:1)", 0.75),
    ("(2:1)-(2:1)-(2:1)", 0.875),
    ("(2:1)-(2:1)-(2:1)-(2:1)", 0.9375),
]

GRAD_CONFIGS = ["(2:1)", "(2:1)@after", "(2:1)|(2:1)", "(2:2)-(2:1)"]
GRAD_TOL = 1e-6
FD_STEP = 1e-5


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    value: float | str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"suite={self.suite} check={self.name} status={status} value={self.value}"


def suite_params():
    out = []
    for text, expected in PARAM_TABLE:
        n = ste.param_count(parse_stack(text), VISUAL_WIDTH).total
        m = round(n / 1e6, 2)
        out.append(Check("params", text, abs(m - expected) <= 0.005 * expected, n))
    n = ste.param_count(parse_stack("(2:2)"), SEMANTIC_WIDTH).total
    m = round(n / 1e6, 2)
    out.append(Check("params", "(2:2)@d=3584", abs(m - SEMANTIC_PARAMS_M) <= 0.005 * SEMANTIC_PARAMS_M, n))
    return out


def suite_ladder():
    out = []
    for text, frac in LADDER:
        got = plan(32, 1, VISUAL_WIDTH, parse_stack(text)).compression_fraction
        out.append(Check("ladder", text, got == frac, got))
    return out


def random_layer_case(rng: Rng):
    spec = [ste.LayerSpec(2, 2), ste.LayerSpec(2, 1), ste.LayerSpec(4, 3)][rng.integers(0, 3)]
    t = int(rng.integers(1, 65))
    p = int(rng.integers(1, 9))
    # (4:3) with t_s=1 needs 3d divisible by 4
    d = int(rng.integers(1, 9)) * 2
    if spec.t_u == 4:
        d = 4 * int(rng.integers(1, 5))
    z = Tensor(rng.normal((t, p, d)))
    w = ste.init_weights(spec, d, "scaled_uniform", rng)
    return spec, z, w


def suite_oracle(count=50, seed=0):
    rng = Rng(seed, 11)
    worst = 0.0
    for _ in range(count):
        spec, z, w = random_layer_case(rng)
        got = ste.layer_forward(z, spec, w).data
        ref = reference_layer_forward(z.data, spec, w.kernel.data, w.bias.data)
        worst = max(worst, float(np.max(np.abs(got - ref))) if got.shape == ref.shape else np.inf)
    return [Check("oracle", f"layer_forward_vs_nested_loops[{count}]", worst <= 1e-12, worst)]


def pipeline_grad_errors(spec_text, seed=0, activation="tanh"):
    """Max relative error per trainable tensor for a tiny pipeline."""
    cfg = PipelineConfig(d_raw=5, d_vis=6, d_sem=8, p=2, vocab=5, seed=seed,
                         stack=parse_stack(spec_text, activation))
    pipe = Pipeline.create(cfg, np.float64)
    batch = generate(SyntheticTask(t=4, p=2, d_raw=5, seed=seed), 1)[0]
    with Tape() as tape:
        loss = pipe.forward(batch)
    grads = tape.grad(loss, list(pipe.weights.values()))
    errors = {}
    for name, w in pipe.weights.items():
        def f(x, name=name):
            return pipe.with_weights({name: Tensor(x)}).forward(batch).item()
        errors[name] = max_rel_error(grads[w], finite_diff(f, w.data, FD_STEP))
    return errors


def suite_grad():
    out = []
    for text in GRAD_CONFIGS:
        errors = pipeline_grad_errors(text)
        worst = max(errors.values())
        out.append(Check("grad", text, worst <= GRAD_TOL, f"{worst:.3e}"))
    return out


def suite_identity():
    rng = Rng(0, 21)
    worst = 0.0
    for depth in (1, 2, 3):
        stack = parse_stack("-".join(["(2:2)"] * depth))
        d = 2 * int(rng.integers(1, 9))
        z = Tensor(rng.normal((int(rng.integers(1, 33)), 3, d)))
        ws = ste.init_stack(stack, d, "identity_preserving")
        y = ste.stack_forward(z, stack, ws)
        t = z.shape[0]
        worst = max(worst, float(np.max(np.abs(y.data[:t] - z.data))))
    return [Check("identity", "(2:2)-stacks", worst == 0.0, worst)]


def suite_determinism():
    a = Rng(123, 4).normal((64,))
    b = Rng(123, 4).normal((64,))
    s = parse_stack("(2:1)-(4:3)")
    wa = ste.init_stack(s, 8, rng=Rng(9))
    wb = ste.init_stack(s, 8, rng=Rng(9))
    same_w = all(x.kernel.data.tobytes() == y.kernel.data.tobytes() and
                 x.bias.data.tobytes() == y.bias.data.tobytes() for x, y in zip(wa, wb))
    task = SyntheticTask()
    ga = generate(task, 6)
    gb = generate(task, 6)
    same_g = all(x.frames.tobytes() == y.frames.tobytes() for x, y in zip(ga, gb))
    return [Check("determinism", "rng", a.tobytes() == b.tobytes(), ""),
            Check("determinism", "init_weights", same_w, ""),
            Check("determinism", "generate", same_g, "")]


SUITES = {
    "oracle": suite_oracle,
    "grad": suite_grad,
    "identity": suite_identity,
    "determinism": suite_determinism,
    "params": suite_params,
    "ladder": suite_ladder,
}


def run_suite(name: str) -> list[Check]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name]()
