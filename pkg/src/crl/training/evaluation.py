"""Greedy evaluation, accuracy tables and their percentile aggregation."""
import csv
import io
from dataclasses import astuple, dataclass, field

import numpy as np

from ..meta_mdp import run_episodes

COLUMNS = ("episodes", "split", "length", "src_lang", "tgt_lang", "seed", "accuracy")
AGG_COLUMNS = ("episodes", "split", "length", "n_seeds", "p10", "p50", "p90")


@dataclass(frozen=True)
class EvalRow:
    episodes: int
    split: str
    length: int
    src_lang: int
    tgt_lang: int
    seed: int
    accuracy: float

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy must lie in [0, 1], got {self.accuracy}")


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)

    def extend(self, rows):
        self.rows.extend(rows)
        return self

    def lookup(self, split, length, episodes=None):
        """Accuracy averaged over language pairs, at the latest (or given) stamp."""
        rows = [r for r in self.rows if r.split == split and r.length == length]
        if not rows:
            raise KeyError(f"no rows for split={split} length={length}")
        stamp = max(r.episodes for r in rows) if episodes is None else episodes
        return float(np.mean([r.accuracy for r in rows if r.episodes == stamp]))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow(_fmt_row(astuple(r)))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rd = csv.reader(io.StringIO(text))
        header = next(rd, None)
        if tuple(header or ()) != COLUMNS:
            raise ValueError(f"unexpected header {header}")
        rows = [EvalRow(int(e), s, int(k), int(a), int(b), int(sd), float(acc))
                for e, s, k, a, b, sd, acc in rd]
        return cls(rows)


def _fmt_row(values):
    return [f"{v:.6f}" if isinstance(v, float) else v for v in values]


def _by_pool(pools):
    """``pools`` maps (split, length, src, tgt) -> instances."""
    return sorted((k, list(v)) for k, v in pools.items() if len(v))


def evaluate_policy(policy, modules, pools, mode, episodes, seed, batch=512):
    """Greedy rollouts on every pool; one row per pool."""
    items = _by_pool(pools)
    flat = [(i, p) for i, (_, insts) in enumerate(items) for p in insts]
    hits = np.zeros(len(items))
    for lo in range(0, len(flat), batch):
        chunk = flat[lo:lo + batch]
        traces = run_episodes(policy, modules, [p for _, p in chunk], mode, greedy=True)
        for (i, _), t in zip(chunk, traces):
            hits[i] += t.correct
    return [EvalRow(episodes, sp, k, s, t, seed, float(hits[i] / len(insts)))
            for i, ((sp, k, s, t), insts) in enumerate(items)]


def evaluate_baseline(model, pools, episodes, seed):
    rows = []
    for (sp, k, s, t), insts in _by_pool(pools):
        pred = model.predict(insts)
        acc = float(np.mean(pred == np.array([p.answer for p in insts])))
        rows.append(EvalRow(episodes, sp, k, s, t, seed, acc))
    return rows


def evaluate(learner, pools, episodes=0, seed=None):
    """Accuracy of a trained learner (CRL variant or baseline) on the given pools."""
    seed = learner.cfg.seed if seed is None else seed
    if learner.baseline is not None:
        return EvalReport(evaluate_baseline(learner.baseline, pools, episodes, seed))
    return EvalReport(evaluate_policy(learner.policy, learner.modules, pools, learner.cfg.mode(),
                                      episodes, seed))


def aggregate(reports):
    """10/50/90 percentiles over seeds of the pair-averaged accuracy per (episodes, split, length)."""
    per = {}
    for rep in reports:
        for r in rep.rows:
            per.setdefault((r.episodes, r.split, r.length), {}).setdefault(r.seed, []).append(r.accuracy)
    out = []
    for key in sorted(per):
        vals = np.array([np.mean(v) for _, v in sorted(per[key].items())])
        p10, p50, p90 = np.percentile(vals, [10, 50, 90])
        out.append((*key, len(vals), float(p10), float(p50), float(p90)))
    return out


def aggregate_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGG_COLUMNS)
    for r in rows:
        w.writerow(_fmt_row(r))
    return buf.getvalue()
