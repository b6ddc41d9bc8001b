"""Policy and value function over computation states.

A GRU reads the current state row by row (with the target-language one-hot
appended to every row when there is one).  From the final hidden state the
policy picks an action kind (HALT / REDUCE / TRANSLATE), then a reducer or a
translator; for REDUCE it then scores every window of three consecutive
positions from the encoder features of those positions, with one scorer per
reducer so the window choice is conditioned on the reducer picked.

Everything is batched over states of different lengths: states are padded at
the end, and since the GRU is causal the padding never leaks into real
positions.
"""
from dataclasses import dataclass

import numpy as np

from .numeric import Tensor, gru_sequence, init_gru, init_params, ops, param
from .problem_graph import BLOCK, LOCAL_OP, TIMES

HALT, REDUCE, TRANSLATE = 0, 1, 2
KIND_NAMES = ("HALT", "REDUCE", "TRANSLATE")
MASKED = -1e30


@dataclass
class ActionSample:
    kind: int
    module: int = 0
    window: int = -1
    logp: float = 0.0
    entropy: float = 0.0
    value: float = 0.0

    @property
    def kind_name(self):
        return KIND_NAMES[self.kind]


@dataclass
class ControllerConfig:
    width: int
    n_targets: int = 0
    hidden: int = 128
    n_reducers: int = 1
    n_translators: int = 0
    allow_halt: bool = True
    operator_windows: bool = False
    shared_encoder: bool = True

    @property
    def input_dim(self):
        return self.width + self.n_targets

    @property
    def kind_mask(self):
        m = np.array([self.allow_halt, True, self.n_translators > 0])
        return np.where(m, 0.0, MASKED)


def init_controller(config, rng):
    """Parameters keyed ``controller.*``; each block draws from its own stream."""
    H, R, T = config.hidden, config.n_reducers, config.n_translators
    p = {}
    p.update(init_gru("controller.enc", config.input_dim, H, rng("init.controller", 0)))
    g = rng("init.controller", 1)

    def lin(name, n_in, n_out):
        p[f"{name}.W"] = param(init_params((n_in, n_out), "uniform_xavier", g), f"{name}.W")
        p[f"{name}.b"] = param(init_params((n_out,), "zeros", g), f"{name}.b")

    lin("controller.kind", H, 3)
    lin("controller.reducer", H, R)
    if T:
        lin("controller.translator", H, T)
    lin("controller.window", 3 * H, R)
    lin("controller.value", H, 1)
    if not config.shared_encoder:
        p.update(init_gru("controller.venc", config.input_dim, H, rng("init.controller", 2)))
    return p


@dataclass
class StateBatch:
    """Padded, time-major encoder input for a list of states."""

    x: np.ndarray          # (Lmax * B, input_dim)
    lengths: np.ndarray    # (B,)
    win_mask: np.ndarray   # (B, max(Lmax - 2, 0)) additive; 0 = allowed
    has_window: np.ndarray  # (B,) bool

    @property
    def size(self):
        return self.lengths.shape[0]


def window_allowed(seq, operator_windows):
    """Boolean per window start; optionally only windows with an operator in the middle."""
    L = seq.shape[0]
    if L < 3:
        return np.zeros(0, dtype=bool)
    allowed = np.ones(L - 2, dtype=bool)
    if operator_windows:
        mid = np.argmax(seq[1:L - 1], axis=1) % BLOCK
        allowed &= mid >= 10
    return allowed


def make_batch(seqs, targets, config):
    B = len(seqs)
    lengths = np.array([s.shape[0] for s in seqs], dtype=np.int64)
    if (lengths == 0).any():
        raise ValueError("cannot encode an empty state")
    Lmax = int(lengths.max())
    x = np.zeros((Lmax, B, config.input_dim))
    for b, s in enumerate(seqs):
        x[: s.shape[0], b, : config.width] = s
        if config.n_targets:
            if targets[b] is None:
                raise ValueError("multilingual controller needs a target language")
            x[: s.shape[0], b, config.width + targets[b]] = 1.0
    nw = max(Lmax - 2, 0)
    win_mask = np.full((B, nw), MASKED)
    has = np.zeros(B, dtype=bool)
    for b, s in enumerate(seqs):
        ok = window_allowed(s, config.operator_windows)
        win_mask[b, : ok.size][ok] = 0.0
        has[b] = ok.any()
    return StateBatch(x.reshape(Lmax * B, config.input_dim), lengths, win_mask, has)


def _encode(params, batch, prefix="controller.enc"):
    B = batch.size
    hs = gru_sequence(Tensor(batch.x), B, params, prefix)
    feats = ops.concat(hs, axis=0)
    last = (batch.lengths - 1) * B + np.arange(B)
    return feats, ops.take_rows(feats, last)


def _lin(params, name, x):
    return ops.add(ops.matmul(x, params[f"{name}.W"]), params[f"{name}.b"])


def _window_scores(params, feats, B, Lmax):
    """(Wn * B, R) scores, row w * B + b is window w of state b."""
    nw = Lmax - 2
    left = ops.slice_rows(feats, 0, nw * B)
    mid = ops.slice_rows(feats, B, (nw + 1) * B)
    right = ops.slice_rows(feats, 2 * B, Lmax * B)
    return _lin(params, "controller.window", ops.concat([left, mid, right], axis=1))


def _np_log_softmax(z, axis=-1):
    z = z - z.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def _entropy(logp):
    p = np.exp(logp)
    return -(p * np.where(p > 0, logp, 0.0)).sum(axis=-1)


class Controller:
    def __init__(self, config, params):
        self.config = config
        self.params = params

    @classmethod
    def create(cls, config, rng):
        return cls(config, init_controller(config, rng))

    # -- single-state interface ------------------------------------------

    def encode(self, state, target=None):
        """(per-position features (L, H), summary (H,)) as arrays."""
        batch = make_batch([np.asarray(state)], [target], self.config)
        feats, summary = _encode(self.params, batch)
        return feats.data, summary.data[0]

    def evaluate_value(self, state, target=None):
        return float(self.values([np.asarray(state)], [target])[0])

    def sample_action(self, state, target=None, greedy=False, rng=None):
        return self.act([np.asarray(state)], [target], [rng], greedy)[0]

    # -- batched ---------------------------------------------------------

    def distributions(self, seqs, targets):
        """Log-probabilities of every head for a list of states (no tape).

        Returns dict with ``kind`` (B, 3), ``reducer`` (B, R), ``translator``
        (B, T), ``window`` (B, Wn, R) log-probs, ``has_window`` and ``value``.
        """
        cfg, p = self.config, self.params
        batch = make_batch(seqs, targets, cfg)
        B, Lmax = batch.size, int(batch.lengths.max())
        feats, summary = _encode(p, batch)
        out = {
            "kind": _np_log_softmax(_lin(p, "controller.kind", summary).data + cfg.kind_mask),
            "reducer": _np_log_softmax(_lin(p, "controller.reducer", summary).data),
            "has_window": batch.has_window,
            "value": self._value(batch, summary).data[:, 0],
        }
        if cfg.n_translators:
            out["translator"] = _np_log_softmax(_lin(p, "controller.translator", summary).data)
        if Lmax >= 3:
            s = _window_scores(p, feats, B, Lmax).data.reshape(Lmax - 2, B, -1).transpose(1, 0, 2)
            s = s + batch.win_mask[:, :, None]
            out["window"] = _np_log_softmax(s, axis=1)
        return out

    def _value(self, batch, summary):
        if not self.config.shared_encoder:
            _, summary = _encode(self.params, batch, "controller.venc")
        return _lin(self.params, "controller.value", summary)

    def values(self, seqs, targets):
        batch = make_batch(seqs, targets, self.config)
        _, summary = _encode(self.params, batch)
        return self._value(batch, summary).data[:, 0]

    def act(self, seqs, targets, rngs, greedy=False):
        d = self.distributions(seqs, targets)
        B = len(seqs)
        u = np.zeros((B, 3)) if greedy else np.array([r.random(3) for r in rngs])
        rows = np.arange(B)
        lk = d["kind"]
        kind = _choose(lk, u[:, 0], greedy)
        logp = lk[rows, kind]
        ent = _entropy(lk)
        module = np.zeros(B, dtype=np.int64)
        window = np.full(B, -1, dtype=np.int64)
        red = kind == REDUCE
        if red.any():
            lr = d["reducer"]
            rm = _choose(lr, u[:, 1], greedy)
            module = np.where(red, rm, module)
            logp = logp + np.where(red, lr[rows, rm], 0.0)
            ent = ent + np.where(red, _entropy(lr), 0.0)
            wsel = red & d["has_window"]
            if wsel.any():
                lw = d["window"][rows, :, module]
                wm = _choose(lw, u[:, 2], greedy)
                window = np.where(wsel, wm, window)
                logp = logp + np.where(wsel, lw[rows, wm], 0.0)
                ent = ent + np.where(wsel, _entropy(lw), 0.0)
        tr = kind == TRANSLATE
        if tr.any():
            lt = d["translator"]
            tm = _choose(lt, u[:, 1], greedy)
            module = np.where(tr, tm, module)
            logp = logp + np.where(tr, lt[rows, tm], 0.0)
            ent = ent + np.where(tr, _entropy(lt), 0.0)
        value = d["value"]
        return [ActionSample(int(kind[b]), int(module[b]), int(window[b]), float(logp[b]),
                             float(ent[b]), float(value[b])) for b in range(B)]

    # -- taped, for updates ----------------------------------------------

    def evaluate_actions(self, seqs, targets, kinds, modules, windows, with_entropy=True):
        """Recorded log-prob (B,), entropy (B,) and value (B, 1) of stored actions.

        The entropy is that of the heads along each action's own path: the
        kind head always, then the module and window heads it went through.
        """
        cfg, p = self.config, self.params
        batch = make_batch(seqs, targets, cfg)
        B, Lmax = batch.size, int(batch.lengths.max())
        kinds = np.asarray(kinds)
        modules = np.asarray(modules)
        windows = np.asarray(windows)
        feats, summary = _encode(p, batch)

        kmask = Tensor(np.broadcast_to(cfg.kind_mask, (B, 3)).copy())
        klog = _lin(p, "controller.kind", summary)
        klog = ops.add(klog, kmask)
        lk = ops.row_log_softmax(klog)
        terms = [ops.pick(lk, kinds)]
        ents = [_tape_entropy(klog, lk)] if with_entropy else []

        red = kinds == REDUCE
        if cfg.n_reducers > 1:
            rlog = _lin(p, "controller.reducer", summary)
            lr = ops.row_log_softmax(rlog)
            terms.append(ops.mul(ops.pick(lr, modules * red), Tensor(red.astype(float))))
            if with_entropy:
                ents.append(ops.mul(_tape_entropy(rlog, lr), Tensor(red.astype(float))))
        if cfg.n_translators > 0:
            tr = kinds == TRANSLATE
            tlog = _lin(p, "controller.translator", summary)
            lt = ops.row_log_softmax(tlog)
            terms.append(ops.mul(ops.pick(lt, modules * tr), Tensor(tr.astype(float))))
            if with_entropy and cfg.n_translators > 1:
                ents.append(ops.mul(_tape_entropy(tlog, lt), Tensor(tr.astype(float))))
        use_w = red & batch.has_window & (windows >= 0)
        if Lmax >= 3 and use_w.any():
            nw = Lmax - 2
            s = _window_scores(p, feats, B, Lmax)
            # column of the chosen reducer for every (window, state) row
            col = ops.pick(s, np.tile(np.where(red, modules, 0), nw))
            # reorder to state-major (B, nw)
            perm = (np.arange(nw)[None, :] * B + np.arange(B)[:, None]).ravel()
            wl = ops.reshape(ops.take_rows(ops.reshape(col, (nw * B, 1)), perm), (B, nw))
            wl = ops.add(wl, Tensor(batch.win_mask))
            lw = ops.row_log_softmax(wl)
            terms.append(ops.mul(ops.pick(lw, np.where(use_w, windows, 0)), Tensor(use_w.astype(float))))
            if with_entropy:
                e = _tape_entropy(wl, lw)
                ents.append(ops.mul(e, Tensor(use_w.astype(float))))
        logp = terms[0]
        for t in terms[1:]:
            logp = ops.add(logp, t)
        ent = None
        if ents:
            ent = ents[0]
            for e in ents[1:]:
                ent = ops.add(ent, e)
        value = self._value(batch, summary)
        return logp, ent, value


def _tape_entropy(logits, logp):
    probs = ops.row_softmax(logits)
    plogp = ops.mul(probs, logp)
    n = logits.shape[1]
    # row sums via a ones column
    return ops.scale(ops.reshape(ops.matmul(plogp, Tensor(np.ones((n, 1)))), (logits.shape[0],)), -1.0)


def _choose(logp, u, greedy):
    """Row-wise inverse-CDF draw (or argmax) from log-probs (B, n) with uniforms (B,)."""
    if greedy:
        return np.argmax(logp, axis=1)
    cdf = np.cumsum(np.exp(logp), axis=1)
    i = (cdf <= (u * cdf[:, -1])[:, None]).sum(axis=1)
    return np.minimum(i, logp.shape[1] - 1)


class HardcodedController:
    """Order-of-operations policy on the argmax-decoded numeral state.

    Leftmost ``*`` window first, otherwise the leftmost operator window;
    HALT once a single token remains or the state does not decode to an
    alternating digit/operator sequence.
    """

    def act(self, seqs, targets=None, rngs=None, greedy=True):
        return [hardcoded_controller_action(s) for s in seqs]

    def values(self, seqs, targets=None):
        return np.zeros(len(seqs))


def hardcoded_controller_action(state):
    ids = np.argmax(np.asarray(state), axis=1) % BLOCK
    L = ids.shape[0]
    if L == 1:
        return ActionSample(HALT)
    well_formed = L % 2 == 1 and all(ids[i] < 10 for i in range(0, L, 2)) \
        and all(ids[i] in LOCAL_OP for i in range(1, L, 2))
    if not well_formed:
        return ActionSample(HALT)
    op_pos = list(range(1, L, 2))
    times = [i for i in op_pos if ids[i] == TIMES]
    mid = times[0] if times else op_pos[0]
    return ActionSample(REDUCE, 0, mid - 1)
