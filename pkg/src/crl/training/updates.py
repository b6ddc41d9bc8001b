"""Parameter updates: clipped-surrogate steps for the controller, NLL steps for the modules."""
import logging
from dataclasses import dataclass

import numpy as np

from ..controller import REDUCE
from ..modules_lib import reducer_logits
from ..numeric import Graph, NonFiniteError, Tensor, adam_step, backward, ops
from ..problem_graph import encode

log = logging.getLogger(__name__)


@dataclass
class PPOStats:
    minibatches: int = 0
    clipped_frac: float = 0.0
    policy_loss: float = 0.0
    value_loss: float = 0.0
    entropy: float = 0.0
    aborted: bool = False


def surrogate_coefficients(ratio, adv, eps):
    """d(loss)/d(logp) per sample for loss = -mean(min(r A, clip(r) A)).

    Zero wherever the clipped branch is the smaller one.
    """
    n = ratio.shape[0]
    clipped = ((adv > 0) & (ratio > 1 + eps)) | ((adv < 0) & (ratio < 1 - eps))
    return np.where(clipped, 0.0, -ratio * adv / n), clipped


def clipped_surrogate(ratio, adv, eps):
    return np.minimum(ratio * adv, np.clip(ratio, 1 - eps, 1 + eps) * adv)


def ppo_loss(controller, steps, cfg):
    """Taped loss whose gradient is the clipped-surrogate gradient plus value and entropy terms."""
    n = len(steps)
    with_ent = cfg.entropy_coef != 0
    logp, ent, value = controller.evaluate_actions(steps.seqs, steps.targets, steps.kinds,
                                                   steps.modules, steps.windows, with_ent)
    adv = steps.advantages
    if cfg.normalize_advantages and n > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    ratio = np.exp(logp.data - steps.logp)
    coef, clipped = surrogate_coefficients(ratio, adv, cfg.clip_eps)
    loss = ops.total(logp, weights=coef)
    diff = ops.sub(ops.reshape(value, (n,)), Tensor(steps.returns))
    vl = ops.total(ops.mul(diff, diff), weights=np.full(n, cfg.value_coef / n))
    loss = ops.add(loss, vl)
    if ent is not None:
        loss = ops.add(loss, ops.total(ent, weights=np.full(n, -cfg.entropy_coef / n)))
    info = {
        "policy_loss": -float(clipped_surrogate(ratio, adv, cfg.clip_eps).mean()),
        "value_loss": float((diff.data ** 2).mean()),
        "entropy": float(ent.data.mean()) if ent is not None else 0.0,
        "clipped": float(clipped.mean()),
    }
    return loss, info


def named_grads(params, grads):
    return {name: grads[t] for name, t in params.items() if t in grads}


def ppo_gradients(controller, steps, cfg):
    with Graph() as g:
        loss, info = ppo_loss(controller, steps, cfg)
    return named_grads(controller.params, backward(g, loss)), info


def controller_update(controller, buffer, cfg, adam, rng):
    """Several epochs of shuffled minibatch steps over the buffer; returns PPOStats.

    A non-finite value anywhere aborts the whole update and restores the
    parameters (and optimiser moments) from before it started.
    """
    if not len(buffer):
        raise ValueError("controller_update needs a non-empty buffer")
    steps = buffer.steps()
    n = len(steps)
    saved = {k: v.data.copy() for k, v in controller.params.items()}
    saved_adam = (adam.t, {k: v.copy() for k, v in adam.m.items()}, {k: v.copy() for k, v in adam.v.items()})
    stats = PPOStats()
    try:
        for _ in range(cfg.ppo_epochs):
            order = rng.permutation(n)
            for lo in range(0, n, cfg.minibatch):
                grads, info = ppo_gradients(controller, steps.take(order[lo:lo + cfg.minibatch]), cfg)
                adam_step(controller.params, grads, adam)
                stats.minibatches += 1
                stats.policy_loss += info["policy_loss"]
                stats.value_loss += info["value_loss"]
                stats.entropy += info["entropy"]
                stats.clipped_frac += info["clipped"]
    except NonFiniteError as e:
        for k, v in saved.items():
            controller.params[k].data = v
        adam.t, adam.m, adam.v = saved_adam
        log.warning("controller update aborted, parameters restored: %s", e)
        return PPOStats(aborted=True)
    m = max(stats.minibatches, 1)
    stats.policy_loss /= m
    stats.value_loss /= m
    stats.entropy /= m
    stats.clipped_frac /= m
    return stats


# -- modules ---------------------------------------------------------------

def eligible(trace):
    return trace.final is not None and trace.final.shape[0] == 1 and bool(trace.effective)


def recompute_chain(traces, modules):
    """Re-run every trace's effective actions on the tape, all traces at once.

    Rows of all live states sit in one pool tensor; each trace keeps the
    indices of its current rows.  Wave t applies the t-th effective action
    of every trace, one primitive call per module.  Returns
    ``(log-prob of each final row (n, V), prob rows (n, V))``.
    """
    vocab_w = modules.width
    plans = [t.effective for t in traces]
    inputs = [encode(t.problem.tokens, t.problem.vocab) for t in traces]
    rows, start = [], 0
    for x in inputs:
        rows.append(list(range(start, start + x.shape[0])))
        start += x.shape[0]
    pool = Tensor(np.concatenate(inputs, axis=0))
    logpool = Tensor(np.zeros((pool.shape[0], vocab_w)))
    for wave in range(max(len(p) for p in plans)):
        groups = {}
        for i, plan in enumerate(plans):
            if wave < len(plan):
                kind, m, w = plan[wave]
                groups.setdefault((kind, m), []).append((i, w))
        new_p, new_lp = [], []
        size = pool.shape[0]
        for (kind, m), members in sorted(groups.items()):
            if kind == REDUCE:
                idx = [r for i, w in members for r in rows[i][w:w + 3]]
                win = ops.reshape(ops.take_rows(pool, idx), (len(members), 3 * vocab_w))
                z = reducer_logits(win, *modules.reducer_params(m))
                for j, (i, w) in enumerate(members):
                    rows[i] = rows[i][:w] + [size + j] + rows[i][w + 3:]
            else:
                idx = [r for i, _ in members for r in rows[i]]
                z = ops.matmul(ops.take_rows(pool, idx), modules.translator_params(m))
                off = size
                for i, _ in members:
                    L = len(rows[i])
                    rows[i] = list(range(off, off + L))
                    off += L
            new_p.append(ops.row_softmax(z))
            new_lp.append(ops.row_log_softmax(z))
            size += z.shape[0]
        pool = ops.concat([pool] + new_p, axis=0)
        logpool = ops.concat([logpool] + new_lp, axis=0)
    final = [r[-1] for r in rows]
    return ops.take_rows(logpool, final), ops.take_rows(pool, final)


def recompute_final(traces, modules):
    """Final distributions of the traces under the current module parameters (arrays)."""
    _, p = recompute_chain(traces, modules)
    return p.data


def module_loss(traces, modules):
    use = [t for t in traces if eligible(t)]
    if not use:
        return None, 0
    logp, _ = recompute_chain(use, modules)
    return ops.nll(logp, [t.problem.answer for t in use]), len(use)


def module_update(traces, modules, adam):
    """One Adam step on the mean NLL of the answer over fully reduced episodes.

    Returns ``(loss, n_eligible)``; ``(None, 0)`` when nothing was eligible.
    """
    if modules.hardcoded or not modules.params:
        return None, 0
    try:
        with Graph() as g:
            loss, n = module_loss(traces, modules)
        if loss is None:
            return None, 0
        grads = named_grads(modules.params, backward(g, loss))
    except NonFiniteError as e:
        log.warning("module update skipped: %s", e)
        return None, 0
    adam_step(modules.params, grads, adam)
    return float(loss.data), n


__all__ = [
    "PPOStats",
    "clipped_surrogate",
    "controller_update",
    "eligible",
    "module_loss",
    "module_update",
    "ppo_gradients",
    "ppo_loss",
    "recompute_chain",
    "recompute_final",
    "surrogate_coefficients",
]
