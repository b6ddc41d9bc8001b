"""Independent oracles shared by the unit and acceptance tests."""
import numpy as np

from crl.numeric import Graph, Tensor, backward, ops, param

FD_STEP = 1e-5
FD_TOL = 1e-4


# -- finite differences -----------------------------------------------------

def fd_max_rel_error(fn, arrays, rng, h=FD_STEP):
    """Worst relative error between taped and central-difference gradients.

    ``fn(*tensors) -> Tensor``; the scalar checked is a fixed random
    projection of the output, so every output element matters.
    """
    tensors = [param(a.copy()) for a in arrays]
    with Graph() as g:
        out = fn(*tensors)
    w = rng.standard_normal(out.shape)
    with g:
        loss = ops.total(out, weights=w)
    grads = backward(g, loss)

    def scalar(vals):
        return float((fn(*[Tensor(v) for v in vals]).data * w).sum())

    worst = 0.0
    for i, a in enumerate(arrays):
        num = np.zeros_like(a)
        for j in np.ndindex(a.shape):
            plus = [x.copy() for x in arrays]
            minus = [x.copy() for x in arrays]
            plus[i][j] += h
            minus[i][j] -= h
            num[j] = (scalar(plus) - scalar(minus)) / (2 * h)
        ana = grads.get(tensors[i], np.zeros_like(a))
        denom = max(np.linalg.norm(ana), np.linalg.norm(num), 1e-8)
        worst = max(worst, float(np.linalg.norm(ana - num) / denom))
    return worst


def _shape(rng):
    return int(rng.integers(1, 5)), int(rng.integers(1, 5))


def _away_from_zero(rng, shape):
    x = rng.standard_normal(shape)
    return np.where(np.abs(x) < 1e-2, 0.5, x)


def primitive_cases():
    """name -> builder(rng) returning (fn, input arrays) for one random instance."""

    def matmul(rng):
        n, k = _shape(rng)
        m = int(rng.integers(1, 5))
        return ops.matmul, [rng.standard_normal((n, k)), rng.standard_normal((k, m))]

    def add(rng):
        n, k = _shape(rng)
        if rng.random() < 0.5:
            return ops.add, [rng.standard_normal((n, k)), rng.standard_normal((n, k))]
        return ops.add, [rng.standard_normal((n, k)), rng.standard_normal(k)]

    def binary(op):
        def build(rng):
            s = _shape(rng)
            return op, [rng.standard_normal(s), rng.standard_normal(s)]
        return build

    def unary(op, away=False):
        def build(rng):
            s = _shape(rng)
            x = _away_from_zero(rng, s) if away else rng.standard_normal(s) * 2
            return op, [x]
        return build

    def scale(rng):
        c = float(rng.standard_normal())
        return (lambda a: ops.scale(a, c)), [rng.standard_normal(_shape(rng))]

    def concat(rng):
        axis = int(rng.integers(0, 2))
        n, k = _shape(rng)
        parts = []
        for _ in range(int(rng.integers(1, 4))):
            d = int(rng.integers(1, 4))
            parts.append(rng.standard_normal((d, k) if axis == 0 else (n, d)))
        return (lambda *ts: ops.concat(ts, axis=axis)), parts

    def nll(rng):
        n, k = _shape(rng)
        t = rng.integers(0, k, size=n)
        return (lambda a: ops.nll(ops.row_log_softmax(a), t)), [rng.standard_normal((n, k))]

    def pick(rng):
        n, k = _shape(rng)
        idx = rng.integers(0, k, size=n)
        return (lambda a: ops.pick(a, idx)), [rng.standard_normal((n, k))]

    def total(rng):
        s = _shape(rng)
        w = rng.standard_normal(s) if rng.random() < 0.5 else None
        return (lambda a: ops.total(a, weights=w)), [rng.standard_normal(s)]

    def take_rows(rng):
        n, k = _shape(rng)
        idx = rng.integers(0, n, size=int(rng.integers(1, 7)))
        return (lambda a: ops.take_rows(a, idx)), [rng.standard_normal((n, k))]

    def slice_rows(rng):
        n, k = _shape(rng)
        lo = int(rng.integers(0, n))
        hi = int(rng.integers(lo + 1, n + 1))
        return (lambda a: ops.slice_rows(a, lo, hi)), [rng.standard_normal((n, k))]

    def slice_cols(rng):
        n, k = _shape(rng)
        lo = int(rng.integers(0, k))
        hi = int(rng.integers(lo + 1, k + 1))
        return (lambda a: ops.slice_cols(a, lo, hi)), [rng.standard_normal((n, k))]

    def reshape(rng):
        n, k = _shape(rng)
        return (lambda a: ops.reshape(a, (k, n))), [rng.standard_normal((n, k))]

    return {
        "matmul": matmul,
        "add": add,
        "sub": binary(ops.sub),
        "mul": binary(ops.mul),
        "scale": scale,
        "concat": concat,
        "relu": unary(ops.relu, away=True),
        "tanh": unary(ops.tanh),
        "logistic": unary(ops.logistic),
        "row_softmax": unary(ops.row_softmax),
        "row_log_softmax": unary(ops.row_log_softmax),
        "nll": nll,
        "pick": pick,
        "sum": total,
        "take_rows": take_rows,
        "slice_rows": slice_rows,
        "slice_cols": slice_cols,
        "reshape": reshape,
    }


def gru_case(rng):
    from crl.numeric import gru_cell

    B, D, H = int(rng.integers(1, 4)), int(rng.integers(1, 5)), int(rng.integers(1, 5))
    arrays = [rng.standard_normal((B, D)), rng.standard_normal((B, H)) * 0.5,
              rng.standard_normal((D, 3 * H)) * 0.7, rng.standard_normal((H, 2 * H)) * 0.7,
              rng.standard_normal((H, H)) * 0.7, rng.standard_normal(3 * H) * 0.3]

    def fn(x, h, Wx, Uzr, Un, b):
        return gru_cell(x, h, {"g.Wx": Wx, "g.Uzr": Uzr, "g.Un": Un, "g.b": b}, "g")

    return fn, arrays


# -- expression oracle ------------------------------------------------------

def rd_eval(text):
    """Recursive descent over '+', '-', '*' with the usual precedence, left-associative, exact integers."""
    pos = 0

    def number():
        nonlocal pos
        start = pos
        while pos < len(text) and text[pos].isdigit():
            pos += 1
        if start == pos:
            raise SyntaxError(f"digit expected at {pos} in {text!r}")
        return int(text[start:pos])

    def term():
        nonlocal pos
        v = number()
        while pos < len(text) and text[pos] == "*":
            pos += 1
            v = v * number()
        return v

    def expr():
        nonlocal pos
        v = term()
        while pos < len(text) and text[pos] in "+-":
            op = text[pos]
            pos += 1
            v = v + term() if op == "+" else v - term()
        return v

    v = expr()
    if pos != len(text):
        raise SyntaxError(f"trailing input in {text!r}")
    return v


def random_expression_text(rng, k):
    digits = rng.integers(0, 10, size=k)
    ops_ = rng.choice(list("+-*"), size=k - 1)
    out = [str(digits[0])]
    for o, d in zip(ops_, digits[1:]):
        out += [str(o), str(d)]
    return "".join(out)


# -- policy gradient oracle -------------------------------------------------

def reinforce_direction(controller, steps, h=1e-6):
    """Central differences of J = mean(A * log pi(a|s)), computed from the forward pass only.

    Returns {param name: dJ/dparam}.  Only the policy heads and encoder
    affect J, so value-only parameters come out zero.
    """
    from crl.controller import REDUCE, TRANSLATE

    adv = steps.returns - steps.values
    B = len(steps)
    rows = np.arange(B)

    def J():
        d = controller.distributions(steps.seqs, steps.targets)
        lp = d["kind"][rows, steps.kinds].copy()
        red = steps.kinds == REDUCE
        if controller.config.n_reducers > 1:
            lp += np.where(red, d["reducer"][rows, steps.modules * red], 0.0)
        if "translator" in d:
            tr = steps.kinds == TRANSLATE
            lp += np.where(tr, d["translator"][rows, steps.modules * tr], 0.0)
        if "window" in d:
            use = red & d["has_window"] & (steps.windows >= 0)
            wl = d["window"][rows, np.where(use, steps.windows, 0), np.where(red, steps.modules, 0)]
            lp += np.where(use, wl, 0.0)
        return float((adv * lp).mean())

    out = {}
    for name, t in controller.params.items():
        g = np.zeros_like(t.data)
        for j in np.ndindex(t.shape):
            old = t.data[j]
            t.data[j] = old + h
            jp = J()
            t.data[j] = old - h
            jm = J()
            t.data[j] = old
            g[j] = (jp - jm) / (2 * h)
        out[name] = g
    return out
