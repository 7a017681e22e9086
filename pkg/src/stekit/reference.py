"""Nested-loop STE layer, written straight from the definition.

Used only as an oracle for :func:`stekit.ste.layer_forward`. It shares no
code with the vectorised path: padding, circular wrapping and the
slide-major rearrangement are all spelled out index by index.
"""

import numpy as np


def reference_layer_forward(z, spec, kernel, bias):
    z = np.asarray(z, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64).tolist()
    bias = np.asarray(bias, dtype=np.float64).tolist()
    t, p, d = z.shape
    t_u, t_o, t_w, t_s = spec.t_u, spec.t_o, spec.t_w, spec.t_s
    n = t_u // t_s
    c = t_o * d // n

    frames = [z[i].tolist() for i in range(t)]
    while len(frames) % t_u:
        frames.append(frames[-1])
    units = len(frames) // t_u

    out = np.zeros((units * t_o, p, d))
    for u in range(units):
        unit = frames[u * t_u:(u + 1) * t_u]
        for q in range(p):
            flat_out = []
            for i in range(n):
                window = []
                for j in range(t_w):
                    window.extend(unit[(i * t_s + j) % t_u][q])
                for ch in range(c):
                    acc = bias[ch]
                    row = kernel[ch]
                    for e in range(t_w * d):
                        acc += row[e] * window[e]
                    flat_out.append(acc)
            for m, v in enumerate(flat_out):
                out[u * t_o + m // d, q, m % d] = v
    return out
