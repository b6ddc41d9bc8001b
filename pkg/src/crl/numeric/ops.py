"""Differentiable primitives.

Every primitive takes :class:`Tensor` inputs, validates shapes, and returns a
Tensor through :func:`emit`, which records it on the active graph.  Only the
broadcasting the models need is supported: a 1-D bias added to every row.
"""
import numpy as np

from .tensor import ShapeError, Tensor, emit


def _need(cond, kind, *tensors):
    if not cond:
        raise ShapeError(f"{kind}: incompatible shapes {[t.shape for t in tensors]}")


def matmul(a, b):
    _need(a.data.ndim == 2 and b.data.ndim == 2 and a.shape[1] == b.shape[0], "matmul", a, b)
    A, B = a.data, b.data
    ga, gb = a.requires_grad, b.requires_grad

    def vjp(g):
        return (g @ B.T if ga else None, A.T @ g if gb else None)

    return emit("matmul", (a, b), A @ B, vjp)


def add(a, b):
    """Elementwise sum; ``b`` may be a bias vector broadcast over rows of ``a``."""
    if a.shape == b.shape:
        return emit("add", (a, b), a.data + b.data, lambda g: (g, g))
    _need(a.data.ndim == 2 and b.data.ndim == 1 and b.shape[0] == a.shape[1], "add", a, b)
    return emit("add", (a, b), a.data + b.data, lambda g: (g, g.sum(axis=0)))


def sub(a, b):
    _need(a.shape == b.shape, "sub", a, b)
    return emit("sub", (a, b), a.data - b.data, lambda g: (g, -g))


def mul(a, b):
    _need(a.shape == b.shape, "mul", a, b)
    A, B = a.data, b.data
    return emit("mul", (a, b), A * B, lambda g: (g * B, g * A))


def scale(a, c):
    c = float(c)
    return emit("scale", (a,), a.data * c, lambda g: (g * c,))


def concat(tensors, axis=0):
    tensors = list(tensors)
    nd = tensors[0].data.ndim
    ok = all(t.data.ndim == nd for t in tensors)
    if ok:
        ref = list(tensors[0].shape)
        ref[axis] = None
        for t in tensors[1:]:
            s = list(t.shape)
            s[axis] = None
            ok = ok and s == ref
    _need(ok, "concat", *tensors)
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, cuts, axis=axis))

    return emit("concat", tuple(tensors), np.concatenate([t.data for t in tensors], axis=axis), vjp)


def relu(a):
    A = a.data
    mask = A > 0
    return emit("relu", (a,), np.where(mask, A, 0.0), lambda g: (g * mask,))


def tanh(a):
    y = np.tanh(a.data)
    return emit("tanh", (a,), y, lambda g: (g * (1.0 - y * y),))


def logistic(a):
    # tanh form never overflows
    y = 0.5 + 0.5 * np.tanh(0.5 * a.data)
    return emit("logistic", (a,), y, lambda g: (g * y * (1.0 - y),))


def _check_rows(a, kind):
    _need(a.data.ndim == 2 and a.shape[1] > 0, kind, a)


def row_softmax(a):
    _check_rows(a, "row_softmax")
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    return emit("row_softmax", (a,), y, vjp)


def row_log_softmax(a):
    _check_rows(a, "row_log_softmax")
    z = a.data - a.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    y = z - lse
    p = np.exp(y)

    def vjp(g):
        return (g - p * g.sum(axis=1, keepdims=True),)

    return emit("row_log_softmax", (a,), y, vjp)


def nll(logp, targets):
    """Mean negative log-likelihood of integer ``targets`` under row log-probs."""
    targets = np.asarray(targets, dtype=np.int64)
    _need(logp.data.ndim == 2 and targets.shape == (logp.shape[0],), "nll", logp)
    n = logp.shape[0]
    rows = np.arange(n)
    val = -logp.data[rows, targets].mean()

    def vjp(g):
        out = np.zeros_like(logp.data)
        out[rows, targets] = -g / n
        return (out,)

    return emit("nll", (logp,), np.asarray(val), vjp)


def pick(a, idx):
    """``a[i, idx[i]]`` for every row i."""
    idx = np.asarray(idx, dtype=np.int64)
    _need(a.data.ndim == 2 and idx.shape == (a.shape[0],), "pick", a)
    rows = np.arange(a.shape[0])

    def vjp(g):
        out = np.zeros_like(a.data)
        out[rows, idx] = g
        return (out,)

    return emit("pick", (a,), a.data[rows, idx], vjp)


def total(a, weights=None):
    """Scalar sum, optionally weighted by a constant array of the same shape."""
    if weights is None:
        return emit("sum", (a,), np.asarray(a.data.sum()), lambda g: (np.full_like(a.data, g),))
    w = np.asarray(weights, dtype=np.float64)
    _need(w.shape == a.shape, "sum", a)
    return emit("sum", (a,), np.asarray((a.data * w).sum()), lambda g: (g * w,))


def take_rows(a, idx):
    """Row gather ``a[idx]``; the backward pass scatter-adds."""
    idx = np.asarray(idx, dtype=np.int64)
    _need(a.data.ndim == 2 and idx.ndim == 1, "take_rows", a)

    def vjp(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return emit("take_rows", (a,), a.data[idx], vjp)


def slice_rows(a, start, stop):
    n = a.shape[0]

    def vjp(g):
        out = np.zeros_like(a.data)
        out[start:stop] = g
        return (out,)

    _need(0 <= start <= stop <= n, "slice_rows", a)
    return emit("slice_rows", (a,), a.data[start:stop], vjp)


def slice_cols(a, start, stop):
    _need(a.data.ndim == 2 and 0 <= start <= stop <= a.shape[1], "slice_cols", a)

    def vjp(g):
        out = np.zeros_like(a.data)
        out[:, start:stop] = g
        return (out,)

    return emit("slice_cols", (a,), a.data[:, start:stop], vjp)


def reshape(a, shape):
    shape = tuple(shape)
    _need(int(np.prod(shape)) == a.data.size, "reshape", a)
    old = a.shape
    return emit("reshape", (a,), a.data.reshape(shape), lambda g: (g.reshape(old),))


PRIMITIVES = {
    "matmul": matmul,
    "add": add,
    "sub": sub,
    "mul": mul,
    "scale": scale,
    "concat": concat,
    "relu": relu,
    "tanh": tanh,
    "logistic": logistic,
    "row_softmax": row_softmax,
    "row_log_softmax": row_log_softmax,
    "nll": nll,
    "pick": pick,
    "sum": total,
    "take_rows": take_rows,
    "slice_rows": slice_rows,
    "slice_cols": slice_cols,
    "reshape": reshape,
}


def forward_primitive(kind, *inputs, **kwargs):
    try:
        fn = PRIMITIVES[kind]
    except KeyError:
        raise ValueError(f"unknown primitive {kind!r}") from None
    if kind == "concat":
        return fn(inputs, **kwargs)
    return fn(*inputs, **kwargs)

