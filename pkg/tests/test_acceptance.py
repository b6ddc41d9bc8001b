"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The CRL-vs-baseline comparison needs about four CPU-hours.  By default it is
judged on the recorded runs in ``results/criterion6`` and the first eval stamp
of seed 0 of each arm is re-trained here and must match the recording bit for
bit.  Set ``CRL_ACCEPTANCE_FULL=1`` to retrain every seed from scratch instead.
"""
import glob
import os
import zlib

import numpy as np
import pytest

from conftest import CRITERIA
from crl.cli import main, make_dataset
from crl.config import resolve
from crl.controller import Controller, ControllerConfig
from crl.meta_mdp import Infinite, run_episodes
from crl.modules_lib import ModuleConfig, apply_reduce, apply_translate, init_module_set
from crl.numeric import SeededRng, stream
from crl.problem_graph import (MULTILINGUAL, Expression, ProblemInstance, build_multilingual_dataset,
                               build_numerical_dataset, eval_mod10, gen_expression)
from crl.training import (EvalReport, RolloutBuffer, TrainConfig, eligible, ppo_gradients,
                          recompute_final, train)

from helpers import (FD_STEP, FD_TOL, fd_max_rel_error, gru_case, primitive_cases, random_expression_text,
                     rd_eval, reinforce_direction)

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")
RECORDED = os.path.join(ROOT, "results", "criterion6")
FULL = os.environ.get("CRL_ACCEPTANCE_FULL") == "1"


def record(n, title, ok, detail):
    CRITERIA[n] = (title, bool(ok), detail)
    assert ok, f"criterion {n} ({title}) failed: {detail}"


def load_config(name):
    with open(os.path.join(CONFIGS, name)) as f:
        return resolve(f.read())


def run_seeds(exp, ds):
    return [train(tc, ds) for tc in exp.seed_configs()]


def final_rows(report, split, lengths):
    last = max(r.episodes for r in report.rows)
    return [r for r in report.rows if r.episodes == last and r.split == split and r.length in lengths]


def final_accuracy(report, split, length):
    (row,) = final_rows(report, split, [length])
    return row.accuracy


# 1 ---------------------------------------------------------------------------

TRACE_INPUTS = {
    "6*1*3-4+6*0*0+1-7-3+3+3*4+1+1+3+3+6+2+7": 3,
    "5+6-4+5*7*3*3*8*0*1-4+6-3*5*3+6-0+0-4-6": 0,
}


def test_criterion_1_oracle_equivalence():
    rng = np.random.default_rng(1)
    bad = 0
    for _ in range(10_000):
        text = random_expression_text(rng, int(rng.integers(1, 21)))
        bad += eval_mod10(Expression.parse(text)) != rd_eval(text) % 10
    traces = [eval_mod10(Expression.parse(t)) == a for t, a in TRACE_INPUTS.items()]
    record(1, "evaluator vs recursive descent", bad == 0 and all(traces),
           f"{bad} mismatches in 10000 expressions (k in 1..20); long trace inputs give "
           f"{[eval_mod10(Expression.parse(t)) for t in TRACE_INPUTS]} (want [3, 0])")


# 2 ---------------------------------------------------------------------------

def test_criterion_2_gradient_checks():
    worst = {}
    for name, build in sorted(primitive_cases().items()):
        rng = np.random.default_rng(zlib.crc32(name.encode()) + 1)
        worst[name] = max(fd_max_rel_error(*build(rng), rng) for _ in range(100))
    rng = np.random.default_rng(99)
    worst["gru_cell"] = max(fd_max_rel_error(*gru_case(rng), rng) for _ in range(100))
    name = max(worst, key=worst.get)
    record(2, "finite-difference gradient checks", worst[name] <= FD_TOL,
           f"{len(worst)} ops x 100 instances, h={FD_STEP:g}; worst relative error {worst[name]:.2e} ({name}) "
           f"<= {FD_TOL:g}")


# 3 ---------------------------------------------------------------------------

def test_criterion_3_dataset_fidelity():
    num = build_numerical_dataset(1e3, stream(0, "data"))
    ml = build_multilingual_dataset(stream(0, "data"))
    per_len = {k: sum(len(v) for key, v in num.pools.items() if key[1] == k) for k in range(2, 11)}
    ml_per_pair_len = {}
    for (split, k, s, t), v in ml.pools.items():
        if split != "heldout":
            ml_per_pair_len[(k, s, t)] = ml_per_pair_len.get((k, s, t), 0) + len(v)
    ml_total = sum(ml_per_pair_len.values())
    srcs = sorted(s for s, _ in ml.heldout_pairs)
    tgts = sorted(t for _, t in ml.heldout_pairs)
    ok = (per_len == {2: 210, **{k: 700 for k in range(3, 11)}} and sum(per_len.values()) == 5810
          and all(n == (210 if k == 2 else 700) for (k, _, _), n in ml_per_pair_len.items())
          and len(ml_per_pair_len) == 80 and ml_total == 46200
          and srcs == tgts == list(range(5)) and not set(ml.heldout_pairs) & set(ml.train_pairs))
    record(3, "dataset counts", ok,
           f"numerical per length {sorted(set(per_len.values()))} total {sum(per_len.values())}; "
           f"multilingual total {ml_total} over {len(ml_per_pair_len)} (length, pair) pools; "
           f"held-out pairs {sorted(ml.heldout_pairs)}")


# 4 ---------------------------------------------------------------------------

def test_criterion_4_hcf_desk_run():
    exp = load_config("desk-hcf.cfg")
    assert exp.train.episodes <= 2e5 and exp.seeds == 3 and exp.train.length_range == (2, 3, 4, 5)
    ds = make_dataset("numerical", 1, exp.data_seed)
    accs = [final_accuracy(r.report, "test", 5) for r in run_seeds(exp, ds)]
    med = float(np.median(accs))
    record(4, "HCF desk run", med >= 0.95,
           f"test length-5 accuracy per seed {[round(a, 3) for a in accs]} after {exp.train.episodes} episodes; "
           f"median {med:.3f} >= 0.95")


# 5 ---------------------------------------------------------------------------

def test_criterion_5_hcc_desk_run():
    exp = load_config("desk-hcc.cfg")
    assert exp.train.episodes == 5e4 and exp.seeds == 3
    ds = make_dataset("numerical", 1, exp.data_seed)
    pools = {key: v for key, v in ds.pools.items() if key[0] == "train" and key[1] in (2, 3)}
    accs = []
    for res in run_seeds(exp, ds):
        rows = final_rows(res.report, "train", [2, 3])
        n = {r.length: len(pools[("train", r.length, 0, 0)]) for r in rows}
        accs.append(sum(r.accuracy * n[r.length] for r in rows) / sum(n.values()))
    med = float(np.median(accs))
    record(5, "HCC desk run", med >= 0.90,
           f"training accuracy on lengths 2-3 per seed {[round(a, 3) for a in accs]}; median {med:.3f} >= 0.90")


# 6 ---------------------------------------------------------------------------

def _recorded_reports(arm):
    dirs = sorted(glob.glob(os.path.join(RECORDED, arm, "seed-*")))
    return [EvalReport.from_csv(open(os.path.join(d, "eval.csv")).read()) for d in dirs]


def _first_stamp_matches(arm, exp, ds):
    rec = _recorded_reports(arm)[0]
    stamp = min(r.episodes for r in rec.rows)
    tc = exp.seed_configs()[0].replace(episodes=stamp)
    got = train(tc, ds).report
    want = EvalReport([r for r in rec.rows if r.episodes == stamp])
    return got.to_csv() == want.to_csv(), stamp


def test_criterion_6_crl_beats_baseline():
    crl_exp, rnn_exp = load_config("desk-crl.cfg"), load_config("desk-rnn.cfg")
    assert crl_exp.train.episodes == rnn_exp.train.episodes == 1e6
    ds = make_dataset("numerical", 1, crl_exp.data_seed)
    if FULL:
        crl = [r.report for r in run_seeds(crl_exp, ds)]
        rnn = [r.report for r in run_seeds(rnn_exp, ds)]
        source = "retrained"
    else:
        crl, rnn = _recorded_reports("crl"), _recorded_reports("rnn")
        if len(crl) < 3 or len(rnn) < 3 or any(max(r.episodes for r in rep.rows) < 1e6 for rep in crl + rnn):
            record(6, "CRL vs baseline", False, f"recorded runs under {RECORDED} are missing or incomplete")
        checks = [_first_stamp_matches(a, e, ds) for a, e in (("crl", crl_exp), ("rnn", rnn_exp))]
        if not all(ok for ok, _ in checks):
            record(6, "CRL vs baseline", False, f"recorded runs do not reproduce at stamps {checks}")
        source = f"recorded runs, re-verified at episodes {[s for _, s in checks]}"
    crl_test = [final_accuracy(r, "test", 5) for r in crl]
    rnn_test = [final_accuracy(r, "test", 5) for r in rnn]
    rnn_gap = [final_accuracy(r, "train", 5) - t for r, t in zip(rnn, rnn_test)]
    lead = float(np.median(crl_test) - np.median(rnn_test))
    gap = float(np.median(rnn_gap))
    record(6, "CRL vs baseline", lead >= 0.20 and gap >= 0.30,
           f"test length-5 median CRL {np.median(crl_test):.3f} vs RNN {np.median(rnn_test):.3f} "
           f"(lead {lead:+.3f} >= 0.20); RNN train-test gap median {gap:.3f} >= 0.30; {source}")


# 7 ---------------------------------------------------------------------------

LONG_RUNS = sorted(os.path.basename(p) for p in glob.glob(os.path.join(CONFIGS, "*.cfg"))
                   if not os.path.basename(p).startswith("desk-"))


def test_criterion_7_long_run_configs_smoke(tmp_path):
    failed = []
    for name in LONG_RUNS:
        out = tmp_path / name
        rc = main(["train", "--config", os.path.join(CONFIGS, name), "--out", str(out), "--episodes", "1000",
                   "--seeds", "1", "--set", "eval_n=20"])
        csv = out / "seed-0" / "eval.csv"
        if rc != 0 or not csv.exists() or not EvalReport.from_csv(csv.read_text()).rows:
            failed.append(name)
    record(7, "long-run configs smoke-tested for 1e3 episodes", LONG_RUNS and not failed,
           f"{len(LONG_RUNS) - len(failed)}/{len(LONG_RUNS)} ran ({', '.join(LONG_RUNS)}); "
           "final long-run numbers are not gated")


# 8 ---------------------------------------------------------------------------

def _accounting(n=2000):
    rng = np.random.default_rng(8)
    c = Controller.create(ControllerConfig(13, 0, 16, 2, 0), SeededRng(8))
    ms = init_module_set(ModuleConfig(2, 0, 16), 13, SeededRng(8))
    probs = [ProblemInstance(gen_expression(int(rng.integers(2, 8)), rng)) for _ in range(n)]
    bad_len = bad_ret = 0
    for t, p in zip(run_episodes(c, ms, probs, Infinite(), [stream(8, "acc", i) for i in range(n)]), probs):
        L = 2 * p.length - 1
        for s in t.steps:
            bad_len += s.state.shape[0] != L
            L -= 2 * (s.effect == "reduce")
        bad_len += t.final.shape[0] != L
        penalised = t.n_steps - (t.steps[-1].effect == "halt")
        bad_ret += abs(t.total_return - (t.terminal - 0.01 * penalised)) > 1e-12
    return bad_len, bad_ret


def _recompute_error():
    rng = np.random.default_rng(9)
    c = Controller.create(ControllerConfig(66, 5, 16, 3, 8), SeededRng(9))
    ms = init_module_set(ModuleConfig(3, 8, 32), 66, SeededRng(9))
    probs = [ProblemInstance(gen_expression(int(rng.integers(2, 6)), rng), int(rng.integers(5)),
                             int(rng.integers(5)), MULTILINGUAL) for _ in range(300)]
    use = [t for t in run_episodes(c, ms, probs, Infinite(), [stream(9, "rec", i) for i in range(300)])
           if eligible(t)]
    return float(np.abs(recompute_final(use, ms) - np.concatenate([t.final for t in use])).max()), len(use)


def _simplex_error(n=100_000):
    rng = np.random.default_rng(10)
    ms = init_module_set(ModuleConfig(3, 8, 32), 66, SeededRng(10))
    seq = rng.dirichlet(np.ones(66), size=12)
    worst = 0.0
    for i in range(n):
        if len(seq) < 3 or i % 4 == 3:
            if len(seq) < 3:
                seq = rng.dirichlet(np.full(66, 0.1), size=12)
            seq = apply_translate(ms, int(rng.integers(8)), seq)
        else:
            j = int(rng.integers(len(seq) - 2))
            out = apply_reduce(ms, int(rng.integers(3)), seq[j:j + 3])
            seq = np.concatenate([seq[:j], out, seq[j + 3:]])
        worst = max(worst, float(np.abs(seq.sum(axis=1) - 1).max()), float(-seq.min()))
    return worst


def _pg_error():
    c = Controller.create(ControllerConfig(13, 0, 6, 2, 0, shared_encoder=False), SeededRng(11))
    ms = init_module_set(ModuleConfig(2, 0, 8), 13, SeededRng(11))
    rng = np.random.default_rng(11)
    probs = [ProblemInstance(gen_expression(int(rng.integers(2, 5)), rng)) for _ in range(8)]
    buf = RolloutBuffer()
    buf.add(run_episodes(c, ms, probs, Infinite(), [stream(11, "pg", i) for i in range(8)]))
    steps = buf.steps()
    cfg = TrainConfig(entropy_coef=0.0, clip_eps=1e9, ppo_epochs=1, minibatch=10 ** 6)
    grads, _ = ppo_gradients(c, steps, cfg)
    want = reinforce_direction(c, steps)
    keys = [k for k in want if np.any(want[k])]
    g = np.concatenate([grads.get(k, np.zeros_like(want[k])).ravel() for k in keys])
    w = np.concatenate([want[k].ravel() for k in keys])
    return float(np.linalg.norm(g + w) / np.linalg.norm(w))


def _repeat_identical():
    exp = load_config("desk-crl.cfg")
    tc = exp.train.replace(episodes=10_000, eval_every=2500, eval_n=50)
    ds = make_dataset("numerical", 1, exp.data_seed)
    a, b = train(tc, ds), train(tc, ds)
    same_params = all(np.array_equal(v, b.learner.arrays()[k]) for k, v in a.learner.arrays().items())
    return a.report.to_csv() == b.report.to_csv() and same_params


def test_criterion_8_property_suite():
    bad_len, bad_ret = _accounting()
    rec, n_rec = _recompute_error()
    simplex = _simplex_error()
    pg = _pg_error()
    same = _repeat_identical()
    ok = bad_len == 0 and bad_ret == 0 and rec <= 1e-9 and simplex <= 1e-12 and pg <= 1e-6 and same
    record(8, "property suite", ok,
           f"length accounting violations {bad_len}, return accounting violations {bad_ret} (2000 episodes); "
           f"recompute max error {rec:.1e} <= 1e-9 ({n_rec} episodes); simplex drift {simplex:.1e} over 1e5 "
           f"module applications; degenerate update vs REINFORCE relative error {pg:.1e} <= 1e-6; "
           f"10^4-episode repeat bit-identical: {same}")
