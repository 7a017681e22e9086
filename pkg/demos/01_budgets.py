"""Parameter and frame budgets for common stacks.

Run with ``python demos/01_budgets.py``.
"""
# %% [markdown]
# A layer with ratio (t_u:t_o) turns every t_u frames into t_o abstract
# frames. The planner reports how many frames and tokens survive a stack and
# what the stack costs in parameters.

# %%
from stekit import planner, ste
from stekit.specstr import parse_stack

stacks = ["(2:2)", "(4:3)", "(4:3)-(4:3)", "(2:1)", "(2:1)-(2:1)",
          "(2:1)-(2:1)-(2:1)", "(2:1)-(2:1)-(2:1)-(2:1)"]
print(planner.ladder_table([parse_stack(s) for s in stacks], d=1152, t=32, p=729))

# %% [markdown]
# Cost depends on the width the layer runs at. A (2:2) layer placed after
# the projector works at the decoder width, which is much wider.

# %%
before = ste.param_count(parse_stack("(2:2)"), 1152).total
after = ste.param_count(parse_stack("(2:2)@after"), 1152, 3584).total
print(f"before projector: {before:,}  after projector: {after:,}  ratio {after / before:.2f}")

# %% [markdown]
# Odd lengths are padded with copies of the last frame. Here 31 frames get
# one extra frame before the first halving.

# %%
pl = planner.plan(31, 1, 1152, parse_stack("(2:1)-(2:1)"))
for i, lp in enumerate(pl.layers):
    print(f"layer {i}: {lp.t_in} frames in, pad {lp.k}, {lp.units} units, {lp.t_out} out")
