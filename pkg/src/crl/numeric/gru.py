"""Gated recurrent unit built from the tape primitives."""
import numpy as np

from . import ops
from .init import init_params
from .tensor import ShapeError, Tensor, param


def init_gru(prefix, input_dim, hidden_dim, rng):
    """Parameters named ``<prefix>.Wx`` (input, 3H), ``.Uzr`` (H, 2H), ``.Un`` (H, H), ``.b`` (3H,).

    Gate column order in ``Wx`` and ``b`` is update, reset, candidate.
    """
    H = hidden_dim
    return {
        f"{prefix}.Wx": param(init_params((input_dim, 3 * H), "uniform_xavier", rng), f"{prefix}.Wx"),
        f"{prefix}.Uzr": param(init_params((H, 2 * H), "uniform_xavier", rng), f"{prefix}.Uzr"),
        f"{prefix}.Un": param(init_params((H, H), "uniform_xavier", rng), f"{prefix}.Un"),
        f"{prefix}.b": param(init_params((3 * H,), "zeros", rng), f"{prefix}.b"),
    }


def _weights(params, prefix):
    return params[f"{prefix}.Wx"], params[f"{prefix}.Uzr"], params[f"{prefix}.Un"], params[f"{prefix}.b"]


def _step(xw, h, Uzr, Un, H):
    # xw already holds x @ Wx + b
    hu = ops.matmul(h, Uzr)
    zr = ops.logistic(ops.add(ops.slice_cols(xw, 0, 2 * H), hu))
    z = ops.slice_cols(zr, 0, H)
    r = ops.slice_cols(zr, H, 2 * H)
    cand = ops.tanh(ops.add(ops.slice_cols(xw, 2 * H, 3 * H), ops.matmul(ops.mul(r, h), Un)))
    # (1 - z) * h + z * cand
    return ops.add(h, ops.mul(z, ops.sub(cand, h)))


def gru_cell(x, h, params, prefix="gru"):
    """One update for a batch: ``x`` (B, D), ``h`` (B, H) -> (B, H)."""
    Wx, Uzr, Un, b = _weights(params, prefix)
    H = Un.shape[0]
    if x.data.ndim != 2 or h.data.ndim != 2 or x.shape[1] != Wx.shape[0] or h.shape[1] != H \
            or x.shape[0] != h.shape[0]:
        raise ShapeError(f"gru_cell: x {x.shape}, h {h.shape} do not match Wx {Wx.shape}, Un {Un.shape}")
    xw = ops.add(ops.matmul(x, Wx), b)
    return _step(xw, h, Uzr, Un, H)


def gru_sequence(xs, batch, params, prefix="gru", h0=None):
    """Run over a time-major stack ``xs`` of shape (T*batch, D).

    Row ``t*batch + i`` is sequence i at time t.  Returns the T hidden states,
    each (batch, H).
    """
    Wx, Uzr, Un, b = _weights(params, prefix)
    H = Un.shape[0]
    if xs.data.ndim != 2 or xs.shape[1] != Wx.shape[0] or xs.shape[0] % batch:
        raise ShapeError(f"gru_sequence: inputs {xs.shape} do not match Wx {Wx.shape} with batch {batch}")
    T = xs.shape[0] // batch
    h = h0 if h0 is not None else Tensor(np.zeros((batch, H)))
    hs = []
    for t in range(T):
        lo, hi = t * batch, (t + 1) * batch
        # constant inputs are sliced directly so no gradient buffer of the full stack is built
        x = ops.slice_rows(xs, lo, hi) if xs.requires_grad else Tensor(xs.data[lo:hi])
        h = _step(ops.add(ops.matmul(x, Wx), b), h, Uzr, Un, H)
        hs.append(h)
    return hs
