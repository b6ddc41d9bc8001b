"""Collecting episodes into indexed slots."""
from dataclasses import dataclass, field

import numpy as np

from ..meta_mdp import run_episodes
from ..numeric import stream


def episode_rng(seed, index):
    return stream(seed, "episode", index)


def collect_rollouts(n, policy, modules, pool, seed, start, mode, chunk=256, order=None):
    """Episodes ``start .. start+n-1``; episode i draws its problem and actions from its own stream.

    Chunks are fixed by index, so running them in any ``order`` fills the
    same slots with the same traces.
    """
    if not pool:
        raise ValueError("empty problem pool")
    slots = [None] * n
    starts = list(range(0, n, chunk))
    for c in (order if order is not None else range(len(starts))):
        lo = starts[c]
        hi = min(lo + chunk, n)
        rngs = [episode_rng(seed, start + i) for i in range(lo, hi)]
        problems = [pool[int(r.integers(len(pool)))] for r in rngs]
        traces = run_episodes(policy, modules, problems, mode, rngs)
        slots[lo:hi] = traces
    return slots


@dataclass
class RolloutBuffer:
    """Traces since the last controller update, flattened to per-step arrays."""

    traces: list = field(default_factory=list)

    def add(self, traces):
        self.traces.extend(traces)

    def clear(self):
        self.traces = []

    def __len__(self):
        return len(self.traces)

    def steps(self):
        seqs, targets, kinds, modules, windows = [], [], [], [], []
        logp, values, returns = [], [], []
        for t in self.traces:
            tgt = t.problem.tgt if t.problem.vocab.n_langs > 1 else None
            g = t.returns_to_go()
            for st, ret in zip(t.steps, g):
                seqs.append(st.state)
                targets.append(tgt)
                kinds.append(st.kind)
                modules.append(st.module)
                windows.append(st.window)
                logp.append(st.logp)
                values.append(st.value)
                returns.append(ret)
        return StepArrays(seqs, targets, np.array(kinds), np.array(modules), np.array(windows),
                          np.array(logp), np.array(values), np.array(returns))


@dataclass
class StepArrays:
    seqs: list
    targets: list
    kinds: np.ndarray
    modules: np.ndarray
    windows: np.ndarray
    logp: np.ndarray
    values: np.ndarray
    returns: np.ndarray

    def __len__(self):
        return len(self.seqs)

    def take(self, idx):
        return StepArrays([self.seqs[i] for i in idx], [self.targets[i] for i in idx],
                          self.kinds[idx], self.modules[idx], self.windows[idx],
                          self.logp[idx], self.values[idx], self.returns[idx])

    @property
    def advantages(self):
        return self.returns - self.values
