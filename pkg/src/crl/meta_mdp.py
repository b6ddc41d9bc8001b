"""Episodes of module application: the evaluator, rewards, and traces.

Infinite-horizon episodes end when HALT is chosen on a single-token state
(earlier HALTs are no-ops by default) or when the step cap is hit.  Every
step except the final HALT costs ``step_penalty``.  Bounded episodes run
exactly ``T`` actions with no penalty and no HALT.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .controller import HALT, REDUCE, TRANSLATE, ActionSample
from .modules_lib import apply_reduce, apply_translate
from .problem_graph import BLOCK, LOCAL_OP, display, encode


@dataclass(frozen=True)
class Infinite:
    step_penalty: float = -0.01
    halt_noop: bool = True
    step_cap: int = None

    def cap_for(self, length):
        return self.step_cap if self.step_cap is not None else 2 * length + 10


@dataclass(frozen=True)
class Bounded:
    T: int

    def cap_for(self, length):
        return self.T


@dataclass
class EnvState:
    seq: np.ndarray
    target: int = None
    step: int = 0
    cap: int = 0
    halted: bool = False
    effect: str = "reset"

    @property
    def length(self):
        return self.seq.shape[0]


@dataclass
class StepRecord:
    state: np.ndarray
    kind: int
    module: int
    window: int
    reward: float
    effect: str
    logp: float = 0.0
    value: float = 0.0
    entropy: float = 0.0
    result: int = -1


@dataclass
class TraceRecord:
    problem: object
    steps: list = field(default_factory=list)
    final: np.ndarray = None
    terminal: float = 0.0
    total_return: float = 0.0

    @property
    def n_steps(self):
        return len(self.steps)

    @property
    def correct(self):
        return self.terminal == 1.0

    @property
    def effective(self):
        """(kind, module, window) of every step that changed the state."""
        return [(s.kind, s.module, s.window) for s in self.steps if s.effect in ("reduce", "translate")]

    def returns_to_go(self):
        r = np.array([s.reward for s in self.steps])
        return np.cumsum(r[::-1])[::-1]


def target_of(problem):
    return problem.tgt if problem.vocab.n_langs > 1 else None


def reset(problem, mode=Infinite()):
    seq = encode(problem.tokens, problem.vocab)
    return EnvState(seq, target_of(problem), 0, mode.cap_for(seq.shape[0]))


def terminal_reward(seq, answer):
    seq = np.asarray(seq)
    return 1.0 if seq.shape[0] == 1 and int(np.argmax(seq[0])) == answer else 0.0


def transition(seq, action, modules):
    """(next seq, effect, result token) for a module action on ``seq``."""
    if action.kind == REDUCE:
        L = seq.shape[0]
        if not 0 <= action.module < modules.n_reducers:
            raise IndexError(f"reducer {action.module} does not exist")
        if L < 3:
            return seq, "noop", -1
        w = action.window
        if not 0 <= w <= L - 3:
            raise IndexError(f"window {w} outside state of length {L}")
        row = apply_reduce(modules, action.module, seq[w:w + 3])
        if row is None:
            return seq, "noop", -1
        return np.concatenate([seq[:w], row, seq[w + 3:]]), "reduce", int(np.argmax(row[0]))
    if action.kind == TRANSLATE:
        return apply_translate(modules, action.module, seq), "translate", -1
    raise ValueError(f"not a module action: {action}")


def step(state, action, modules, problem, mode=Infinite()):
    """Apply ``action``; returns (next state, reward, done)."""
    if state.halted:
        raise RuntimeError("episode already finished")
    nxt = replace(state, step=state.step + 1)
    bounded = isinstance(mode, Bounded)
    if action.kind == HALT:
        if bounded or (mode.halt_noop and state.length > 1):
            nxt.effect = "noop_halt"
        else:
            nxt.effect = "halt"
            nxt.halted = True
            return nxt, terminal_reward(state.seq, problem.answer), True
    else:
        nxt.seq, nxt.effect, _ = transition(state.seq, action, modules)
    reward = 0.0 if bounded else mode.step_penalty
    if nxt.step >= state.cap:
        nxt.halted = True
        reward += terminal_reward(nxt.seq, problem.answer)
    return nxt, reward, nxt.halted


def run_episodes(policy, modules, problems, mode=Infinite(), rngs=None, greedy=False):
    """Run a batch in lockstep: the policy sees all live states at once.

    Transitions are applied one episode at a time through :func:`step`, so a
    trace replayed through ``step`` reproduces its states exactly.
    """
    n = len(problems)
    if rngs is None:
        rngs = [None] * n
    modes = [mode(p) if callable(mode) else mode for p in problems]
    states = [reset(p, m) for p, m in zip(problems, modes)]
    traces = [TraceRecord(p) for p in problems]
    live = list(range(n))
    while live:
        acts = policy.act([states[i].seq for i in live], [states[i].target for i in live],
                          [rngs[i] for i in live], greedy)
        still = []
        for i, a in zip(live, acts):
            s = states[i]
            nxt, r, done = step(s, a, modules, problems[i], modes[i])
            res = int(np.argmax(nxt.seq[a.window])) if nxt.effect == "reduce" else -1
            traces[i].steps.append(StepRecord(s.seq, a.kind, a.module, a.window, r, nxt.effect,
                                              a.logp, a.value, a.entropy, res))
            states[i] = nxt
            if done:
                t = traces[i]
                t.final = nxt.seq
                t.terminal = terminal_reward(nxt.seq, problems[i].answer)
                t.total_return = float(sum(st.reward for st in t.steps))
            else:
                still.append(i)
        live = still
    return traces


def run_episode(policy, modules, problem, mode=Infinite(), rng=None, greedy=False):
    return run_episodes(policy, modules, [problem], mode, [rng], greedy)[0]


def replay(trace, modules, mode=Infinite()):
    """States visited when the trace's actions are re-executed from reset."""
    if callable(mode):
        mode = mode(trace.problem)
    s = reset(trace.problem, mode)
    out = [s.seq]
    for st in trace.steps:
        s, _, _ = step(s, ActionSample(st.kind, st.module, st.window), modules, trace.problem, mode)
        out.append(s.seq)
    return out


# -- rendering -------------------------------------------------------------

def _tokens(seq, vocab):
    return [vocab.symbol(int(i)) for i in np.argmax(seq, axis=1)]


def _join(syms, compact=None):
    if compact is None:
        compact = all(len(s) == 1 for s in syms)
    return ("" if compact else " ").join(syms)


def render_step(st, vocab):
    syms = _tokens(st.state, vocab)
    compact = all(len(s) == 1 for s in syms)
    if st.effect == "reduce":
        w = st.window
        inner = _join(syms[w:w + 3], compact)
        text = _join(syms[:w] + [f"[{inner}]"] + syms[w + 3:], compact)
        lhs = " ".join(syms[w:w + 3])
        note = f"m{st.module}  # {lhs} = {vocab.symbol(st.result)}"
    elif st.effect == "translate":
        text = "[" + _join(syms, compact) + "]"
        note = f"t{st.module}  # translate"
    elif st.effect == "noop_halt":
        text, note = _join(syms), "# tried to HALT"
    elif st.effect == "halt":
        text, note = _join(syms), "# HALT"
    else:
        what = "reduce" if st.kind == REDUCE else "step"
        text, note = _join(syms), f"# no-op {what}"
    return text, note


def render_trace(trace, vocab=None):
    vocab = vocab or trace.problem.vocab
    rows = [render_step(st, vocab) for st in trace.steps]
    if trace.steps and trace.steps[-1].effect != "halt" and trace.final is not None:
        rows.append((_join(_tokens(trace.final, vocab)), "# (step cap)" if len(trace.final) else ""))
    width = max((len(t) for t, _ in rows), default=0) + 4
    lines = [t.ljust(width) + n for t, n in rows]
    lines.append("END")
    return "\n".join(lines)


def trace_header(trace, seed=None):
    p = trace.problem
    return (f"# seed={seed} length={p.length} src={p.src} tgt={p.tgt} "
            f"input={display(p.tokens, p.vocab)} answer={p.vocab.symbol(p.answer)} "
            f"return={trace.total_return:.2f} correct={int(trace.correct)}")


def dump_traces(path, traces, seed=None):
    with open(path, "w") as f:
        for t in traces:
            f.write(trace_header(t, seed) + "\n" + render_trace(t) + "\n\n")


def is_well_formed(ids):
    """Alternating digit/operator argmax sequence of odd length."""
    local = [i % BLOCK for i in ids]
    return len(local) % 2 == 1 and all(x < 10 for x in local[0::2]) and all(x in LOCAL_OP for x in local[1::2])
