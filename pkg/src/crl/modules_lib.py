"""Reducers and translators: the functions the controller composes.

A reducer maps a window of three token distributions to one distribution.
A translator re-represents every token of a sequence with one shared linear
map.  Neither ever sees the target language.
"""
from dataclasses import dataclass, field

import numpy as np

from .numeric import Tensor, init_params, ops, param
from .problem_graph import BLOCK, LOCAL_OP, apply_op


class InvalidWindow(ValueError):
    """Hardcoded reducer was handed something other than digit-op-digit."""


@dataclass
class ModuleConfig:
    n_reducers: int = 1
    n_translators: int = 0
    hidden: int = 128
    hardcoded: bool = False


PRESETS = {
    "numerical": ModuleConfig(1, 0),
    "multilingual": ModuleConfig(3, 8),
    "pathological": ModuleConfig(4, 0),
    "r1t5": ModuleConfig(1, 5),
    "r1t8": ModuleConfig(1, 8),
    "r3t5": ModuleConfig(3, 5),
    "r3t8": ModuleConfig(3, 8),
    "r4t5": ModuleConfig(4, 5),
}
VARIATION_GRID = ("r1t5", "r1t8", "r3t5", "r3t8")


def preset(name, hidden=128, hardcoded=False):
    base = PRESETS[name]
    return ModuleConfig(base.n_reducers, base.n_translators, hidden, hardcoded)


@dataclass
class ModuleSet:
    width: int
    n_reducers: int
    n_translators: int
    hidden: int = 128
    hardcoded: bool = False
    params: dict = field(default_factory=dict)

    def reducer_params(self, i):
        p = f"reducer.{i}"
        return self.params[f"{p}.W1"], self.params[f"{p}.b1"], self.params[f"{p}.W2"], self.params[f"{p}.b2"]

    def translator_params(self, j):
        return self.params[f"translator.{j}.W"]

    def arrays(self):
        return {k: v.data for k, v in self.params.items()}

    def load_arrays(self, arrays):
        for k, v in arrays.items():
            if k.startswith(("reducer.", "translator.")):
                if k not in self.params or self.params[k].shape != v.shape:
                    raise ValueError(f"checkpoint entry {k} {v.shape} does not fit this module set")
                self.params[k].data = np.array(v, dtype=np.float64)

    def copy(self):
        out = ModuleSet(self.width, self.n_reducers, self.n_translators, self.hidden, self.hardcoded)
        out.params = {k: param(v.data.copy(), k) for k, v in self.params.items()}
        return out


def init_module_set(config, width, rng):
    """Independent random initialisation per module, each from its own stream.

    ``rng`` is a callable ``rng(purpose, index)`` returning a Generator, e.g. a
    :class:`~crl.numeric.SeededRng`.
    """
    if config.n_reducers < 1:
        raise ValueError("at least one reducer is required to solve any problem")
    if config.n_translators < 0:
        raise ValueError("translator count must be non-negative")
    ms = ModuleSet(width, config.n_reducers, config.n_translators, config.hidden, config.hardcoded)
    if config.hardcoded:
        return ms
    H, V = config.hidden, width
    for i in range(config.n_reducers):
        g = rng("init.reducer", i)
        for name, shape, scheme in ((f"reducer.{i}.W1", (3 * V, H), "uniform_xavier"),
                                    (f"reducer.{i}.b1", (H,), "zeros"),
                                    (f"reducer.{i}.W2", (H, V), "uniform_xavier"),
                                    (f"reducer.{i}.b2", (V,), "zeros")):
            ms.params[name] = param(init_params(shape, scheme, g), name)
    for j in range(config.n_translators):
        g = rng("init.translator", j)
        name = f"translator.{j}.W"
        ms.params[name] = param(init_params((V, V), "uniform_xavier", g), name)
    return ms


def reducer_logits(windows, W1, b1, W2, b2):
    """Pre-softmax outputs for a batch of flattened windows (n, 3V) -> (n, V)."""
    if windows.data.ndim != 2 or windows.shape[1] != W1.shape[0]:
        raise ValueError(f"reducer expects windows of width {W1.shape[0]}, got {windows.shape}")
    hidden = ops.relu(ops.add(ops.matmul(windows, W1), b1))
    return ops.add(ops.matmul(hidden, W2), b2)


def reducer_apply(window, params):
    """Three probability rows (3, V) -> one probability row (1, V)."""
    if not isinstance(window, Tensor):
        window = Tensor(window)
    if window.data.ndim != 2 or window.shape[0] != 3:
        raise ValueError(f"reducer window must be 3 rows, got shape {window.shape}")
    flat = ops.reshape(window, (1, 3 * window.shape[1]))
    return ops.row_softmax(reducer_logits(flat, *params))


def translator_logits(seq, W):
    if seq.data.ndim != 2 or seq.shape[1] != W.shape[0]:
        raise ValueError(f"translator expects rows of width {W.shape[0]}, got {seq.shape}")
    return ops.matmul(seq, W)


def translator_apply(seq, W):
    """Same map at every position: row x -> softmax(x @ W)."""
    if not isinstance(seq, Tensor):
        seq = Tensor(seq)
    return ops.row_softmax(translator_logits(seq, W))


def hardcoded_reduce(window):
    """Exact mod-10 result of an argmax (digit, operator, digit) numeral window, one-hot."""
    rows = window.data if isinstance(window, Tensor) else np.asarray(window)
    a, op, b = (int(i) for i in np.argmax(rows, axis=1))
    if not (a < 10 and b < 10 and op in LOCAL_OP):
        raise InvalidWindow(f"window argmax {(a, op, b)} is not digit-operator-digit")
    out = np.zeros((1, rows.shape[1]))
    out[0, apply_op(a, LOCAL_OP[op], b)] = 1.0
    return out


def apply_reduce(modules, r, window):
    """Reduced row as an array, or None when a hardcoded reducer rejects the window."""
    if not 0 <= r < modules.n_reducers:
        raise IndexError(f"reducer {r} does not exist (have {modules.n_reducers})")
    if modules.hardcoded:
        try:
            return hardcoded_reduce(window)
        except InvalidWindow:
            return None
    W1, b1, W2, b2 = (t.data for t in modules.reducer_params(r))
    x = np.asarray(window).reshape(1, -1)
    h = x @ W1 + b1
    z = np.where(h > 0, h, 0.0) @ W2 + b2
    return _softmax(z)


def apply_translate(modules, j, seq):
    if not 0 <= j < modules.n_translators:
        raise IndexError(f"translator {j} does not exist (have {modules.n_translators})")
    return _softmax(np.asarray(seq) @ modules.translator_params(j).data)


def _softmax(z):
    # same arithmetic as ops.row_softmax, without the tape
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


__all__ = [
    "BLOCK",
    "InvalidWindow",
    "ModuleConfig",
    "ModuleSet",
    "PRESETS",
    "VARIATION_GRID",
    "apply_reduce",
    "apply_translate",
    "hardcoded_reduce",
    "init_module_set",
    "preset",
    "reducer_apply",
    "reducer_logits",
    "translator_apply",
    "translator_logits",
]
