"""Recurrent sequence-to-sequence baseline that reads the whole expression and emits the answer."""
from dataclasses import dataclass

import numpy as np

from ..numeric import (AdamState, Graph, Tensor, adam_step, backward, gru_cell, gru_sequence,
                       init_gru, init_params, ops, param)


@dataclass
class BaselineConfig:
    width: int
    n_targets: int = 0
    hidden: int = 128
    stop: bool = False

    @property
    def input_dim(self):
        return self.width + self.n_targets


class BaselineParams:
    """Encoder GRU over (target tag, tokens, STOP), one decoder GRU step, linear readout."""

    def __init__(self, config, params):
        self.config = config
        self.params = params

    @classmethod
    def create(cls, config, rng):
        p = {}
        p.update(init_gru("rnn.enc", config.input_dim, config.hidden, rng("init.rnn", 0)))
        p.update(init_gru("rnn.dec", config.width, config.hidden, rng("init.rnn", 1)))
        g = rng("init.rnn", 2)
        p["rnn.out.W"] = param(init_params((config.hidden, config.width), "uniform_xavier", g), "rnn.out.W")
        p["rnn.out.b"] = param(init_params((config.width,), "zeros", g), "rnn.out.b")
        return cls(config, p)

    def rows(self, problem):
        cfg = self.config
        ids = list(problem.tokens)
        n = len(ids) + (1 if cfg.n_targets else 0) + (1 if cfg.stop else 0)
        x = np.zeros((n, cfg.input_dim))
        t = 0
        if cfg.n_targets:
            x[0, cfg.width + problem.tgt] = 1.0
            t = 1
        x[np.arange(t, t + len(ids)), ids] = 1.0
        if cfg.stop:
            x[n - 1, problem.vocab.stop_id] = 1.0
        return x

    def logits(self, problems):
        seqs = [self.rows(p) for p in problems]
        B = len(seqs)
        lengths = np.array([s.shape[0] for s in seqs])
        T = int(lengths.max())
        x = np.zeros((T, B, self.config.input_dim))
        for b, s in enumerate(seqs):
            x[: s.shape[0], b] = s
        hs = gru_sequence(Tensor(x.reshape(T * B, -1)), B, self.params, "rnn.enc")
        last = ops.take_rows(ops.concat(hs, axis=0), (lengths - 1) * B + np.arange(B))
        h = gru_cell(Tensor(np.zeros((B, self.config.width))), last, self.params, "rnn.dec")
        return ops.add(ops.matmul(h, self.params["rnn.out.W"]), self.params["rnn.out.b"])

    def predict(self, problems, batch=512):
        out = []
        for lo in range(0, len(problems), batch):
            out.append(np.argmax(self.logits(problems[lo:lo + batch]).data, axis=1))
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)

    def loss(self, problems):
        return ops.nll(ops.row_log_softmax(self.logits(problems)), [p.answer for p in problems])

    def train_step(self, problems, adam):
        with Graph() as g:
            loss = self.loss(problems)
        grads = backward(g, loss)
        adam_step(self.params, {k: grads[t] for k, t in self.params.items() if t in grads}, adam)
        return float(loss.data)


def baseline_config(vocab, hidden=128):
    return BaselineConfig(vocab.width, vocab.n_langs if vocab.n_langs > 1 else 0, hidden, vocab.stop)


def new_baseline_adam(lr):
    return AdamState(lr=lr)
