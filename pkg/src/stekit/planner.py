"""Frame, token and parameter budgets for STE stacks."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

from .ste import StackSpec, pad_amount, param_count
from .specstr import format_stack

REFERENCE_FRAMES = 32
CSV_COLUMNS = ("spec", "reduction_pct", "final_frames", "tokens_out", "params")


@dataclass(frozen=True)
class LayerPlan:
    t_in: int
    k: int
    units: int
    t_out: int
    params: int


@dataclass
class CompressionPlan:
    spec: str
    t: int
    p: int
    layers: list[LayerPlan] = field(default_factory=list)
    final_frames: int = 0
    compression_fraction: float = 0.0  # at the 32-frame reference length
    reduction_fraction: float = 0.0  # at this plan's own length
    tokens_in: int = 0
    tokens_out: int = 0
    total_params: int = 0

    def csv_row(self) -> dict:
        return {"spec": self.spec,
                "reduction_pct": f"{100 * self.reduction_fraction:.2f}",
                "final_frames": self.final_frames,
                "tokens_out": self.tokens_out,
                "params": self.total_params}


def _ladder(t, stack):
    out = []
    for spec in stack.layers:
        k = pad_amount(t, spec.t_u)
        units = (t + k) // spec.t_u
        out.append((t, k, units, units * spec.t_o))
        t = units * spec.t_o
    return out


def plan(t: int, p: int, d: int, stack: StackSpec,
         d_after: int | None = None) -> CompressionPlan:
    """Per-layer ladder and budgets for ``t`` frames of ``p`` patches."""
    if t < 1 or p < 1:
        raise ValueError(f"need t >= 1 and p >= 1, got t={t}, p={p}")
    counts = param_count(stack, d, d_after)
    rungs = _ladder(t, stack)
    layers = [LayerPlan(*r, params=n) for r, n in zip(rungs, counts.per_layer)]
    final = layers[-1].t_out
    ref_final = _ladder(REFERENCE_FRAMES, stack)[-1][3]
    return CompressionPlan(
        spec=format_stack(stack), t=t, p=p, layers=layers, final_frames=final,
        compression_fraction=1 - ref_final / REFERENCE_FRAMES,
        reduction_fraction=1 - final / t,
        tokens_in=t * p, tokens_out=final * p, total_params=counts.total)


def to_csv(plans: Sequence[CompressionPlan]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for pl in plans:
        writer.writerow(pl.csv_row())
    return buf.getvalue()


def ladder_table(stacks: Sequence[StackSpec], d: int, t: int = REFERENCE_FRAMES,
                 p: int = 1, d_after: int | None = None) -> str:
    """CSV with one row per stack; header only for an empty list."""
    return to_csv([plan(t, p, d, s, d_after) for s in stacks])
