"""Dense float64 tensors and a tape that records primitives for reverse mode.

A :class:`Graph` is only active inside ``with Graph() as g:``.  Primitives
called outside an active graph just compute values; inside, every primitive
whose output depends on a ``requires_grad`` tensor appends a node holding a
vector-Jacobian closure.  Nodes are appended in execution order, so the node
list is already topologically sorted.
"""
import numpy as np


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


class Tensor:
    __slots__ = ("data", "requires_grad", "name", "_op")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name
        # set on outputs of recorded primitives; leaves keep None
        self._op = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def is_leaf(self):
        return self._op is None

    def numpy(self):
        return self.data

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag}, requires_grad={self.requires_grad})"


def param(data, name=None):
    return Tensor(data, requires_grad=True, name=name)


def const(data):
    if isinstance(data, Tensor):
        return data
    return Tensor(data)


class Graph:
    """Tape of primitive applications; activate with ``with``."""

    def __init__(self):
        self.nodes = []
        self._prev = None

    def __enter__(self):
        global _ACTIVE
        self._prev = _ACTIVE
        _ACTIVE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE
        _ACTIVE = self._prev
        return False

    def __len__(self):
        return len(self.nodes)


_ACTIVE = None


def active_graph():
    return _ACTIVE


def emit(kind, inputs, value, vjp):
    """Wrap ``value`` as the output of primitive ``kind``.

    ``vjp(g)`` must return one gradient (or None) per input.
    """
    if not np.isfinite(value).all():
        shapes = [t.shape for t in inputs]
        raise NonFiniteError(f"{kind} produced non-finite values (input shapes {shapes})")
    out = Tensor(value)
    g = _ACTIVE
    if g is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._op = kind
        g.nodes.append((kind, inputs, out, vjp))
    return out


def backward(graph, loss):
    """Reverse sweep over ``graph`` from scalar ``loss``.

    Returns ``{leaf tensor: gradient array}`` for every ``requires_grad``
    leaf reached.  Leaves that are not parameters never appear.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads = {id(loss): np.ones_like(loss.data)}
    leaves = {}
    for kind, inputs, out, vjp in reversed(graph.nodes):
        g = grads.pop(id(out), None)
        if g is None:
            continue
        for t, gi in zip(inputs, vjp(g)):
            if gi is None or not t.requires_grad:
                continue
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
            if t._op is None:
                leaves[key] = t
    return {t: grads[k] for k, t in leaves.items()}
