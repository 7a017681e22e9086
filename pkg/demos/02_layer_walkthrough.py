"""One STE layer by hand, then checked against the nested-loop reference."""
# %%
import numpy as np

from stekit import ste
from stekit.reference import reference_layer_forward
from stekit.rng import Rng
from stekit.ste import LayerSpec, LayerWeights
from stekit.tensor import Tensor

# %% [markdown]
# Three frames of one patch, width 2. A (2:1) layer pads to four frames by
# repeating the last one, then makes two window slides per unit. The second
# slide of each unit wraps around to the unit's first frame.

# %%
z = Tensor(np.array([[[1, 2]], [[3, 4]], [[5, 6]]], dtype=float))
w = LayerWeights(Tensor([[1.0, 10.0, 100.0, 1000.0]]), Tensor([0.5]))
spec = LayerSpec(2, 1)
print("pad:", ste.pad_amount(3, 2))
print("windows per unit:", ste.window_indices(spec).tolist())
out = ste.layer_forward(z, spec, w)
print("output frames:", out.data[:, 0].tolist())
# slide 0 of unit 0 reads (f1, f2): 1 + 20 + 300 + 4000 + 0.5 = 4321.5

# %% [markdown]
# The vectorised path and a plain loop over units, slides and patches agree.

# %%
r = Rng(1)
z = Tensor(r.normal((13, 3, 8)))
for spec in (LayerSpec(2, 2), LayerSpec(2, 1), LayerSpec(4, 3)):
    w = ste.init_weights(spec, 8, rng=r)
    fast = ste.layer_forward(z, spec, w).data
    slow = reference_layer_forward(z.data, spec, w.kernel.data, w.bias.data)
    print(spec, fast.shape, "max diff", np.max(np.abs(fast - slow)))

# %% [markdown]
# Identity initialisation makes (2:2) a no-op, which is a handy starting point.

# %%
stack = ste.StackSpec((LayerSpec(2, 2),) * 3)
ws = ste.init_stack(stack, 8, "identity_preserving")
z = Tensor(r.normal((8, 3, 8)))
print("identity exact:", ste.stack_forward(z, stack, ws).data.tobytes() == z.data.tobytes())
