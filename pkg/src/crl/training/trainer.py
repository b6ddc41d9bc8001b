"""The training loop: rollouts, module and controller updates, curriculum, periodic evaluation."""
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from ..controller import Controller, ControllerConfig, HardcodedController
from ..modules_lib import ModuleConfig, ModuleSet, init_module_set, preset
from ..numeric import AdamState, SeededRng, checkpoint, stream
from ..problem_graph import Curriculum, vocab_for
from .baseline import BaselineParams, baseline_config
from .evaluation import EvalReport, evaluate
from .rollouts import RolloutBuffer, collect_rollouts
from .updates import controller_update, module_update

log = logging.getLogger(__name__)


@dataclass
class Learner:
    cfg: object
    vocab: object
    controller: object = None
    modules: ModuleSet = None
    baseline: BaselineParams = None
    ctrl_adam: AdamState = None
    mod_adam: AdamState = None

    @property
    def policy(self):
        return self.controller

    @property
    def learns_controller(self):
        return isinstance(self.controller, Controller)

    @property
    def learns_modules(self):
        return self.modules is not None and not self.modules.hardcoded

    def arrays(self):
        out = {}
        if self.learns_controller:
            out.update({k: v.data for k, v in self.controller.params.items()})
        if self.learns_modules:
            out.update(self.modules.arrays())
        if self.baseline is not None:
            out.update({k: v.data for k, v in self.baseline.params.items()})
        return out

    def load_arrays(self, arrays):
        groups = []
        if self.learns_controller:
            groups.append(self.controller.params)
        if self.learns_modules:
            groups.append(self.modules.params)
        if self.baseline is not None:
            groups.append(self.baseline.params)
        expected = {k for g in groups for k in g}
        if set(arrays) != expected:
            missing, extra = sorted(expected - set(arrays)), sorted(set(arrays) - expected)
            raise checkpoint.CheckpointError(f"checkpoint does not fit model: missing {missing[:3]}, extra {extra[:3]}")
        for g in groups:
            for k, t in g.items():
                if t.shape != arrays[k].shape:
                    raise checkpoint.CheckpointError(f"{k}: shape {arrays[k].shape}, model wants {t.shape}")
                t.data = np.array(arrays[k], dtype=np.float64)

    def save(self, path):
        checkpoint.save(path, self.arrays())

    def load(self, path):
        self.load_arrays(checkpoint.load(path))


def module_config(cfg):
    if cfg.model == "hcf":
        return ModuleConfig(1, 0, cfg.module_hidden, hardcoded=True)
    if cfg.model == "hcc":
        return ModuleConfig(1, 0, cfg.module_hidden)
    return ModuleConfig(cfg.n_reducers, cfg.n_translators, cfg.module_hidden)


def build_learner(cfg):
    """Fresh parameters for ``cfg.model``, all drawn from streams of ``cfg.seed``."""
    vocab = vocab_for(cfg.task)
    rng = SeededRng(cfg.seed)
    ln = Learner(cfg, vocab)
    if cfg.model == "rnn":
        ln.baseline = BaselineParams.create(baseline_config(vocab, cfg.rnn_hidden), rng)
        ln.ctrl_adam = AdamState(lr=cfg.lr_rnn)
        return ln
    mc = module_config(cfg)
    ln.modules = init_module_set(mc, vocab.width, rng)
    ln.mod_adam = AdamState(lr=cfg.lr_modules)
    if cfg.model == "hcc":
        ln.controller = HardcodedController()
        return ln
    cc = ControllerConfig(
        width=vocab.width,
        n_targets=vocab.n_langs if vocab.n_langs > 1 else 0,
        hidden=cfg.controller_hidden,
        n_reducers=mc.n_reducers,
        n_translators=mc.n_translators,
        allow_halt=cfg.horizon == "infinite",
        operator_windows=cfg.model == "hcf",
        shared_encoder=cfg.shared_encoder,
    )
    ln.controller = Controller.create(cc, rng)
    ln.ctrl_adam = AdamState(lr=cfg.lr_controller)
    return ln


@dataclass
class CurriculumDriver:
    """Stage index as a function of the episode count."""

    n_stages: int
    every: int
    enabled: bool = True

    def stage_at(self, episode):
        if not self.enabled:
            return self.n_stages - 1
        return min(episode // self.every, self.n_stages - 1)

    @property
    def all_data_episode(self):
        return 0 if not self.enabled else (self.n_stages - 1) * self.every

    def transitions(self, total):
        """(episode, stage) pairs at which the stage changes within ``total`` episodes."""
        out = [(0, self.stage_at(0))]
        for s in range(self.stage_at(0) + 1, self.n_stages):
            ep = s * self.every
            if ep >= total:
                break
            out.append((ep, s))
        return out


def curriculum_driver(cfg):
    lengths = cfg.length_range
    every = cfg.rnn_curriculum_every if cfg.model == "rnn" else cfg.curriculum_every
    return CurriculumDriver(len(lengths), every, cfg.curriculum)


@dataclass
class TrainResult:
    learner: Learner
    report: EvalReport
    all_data_episode: int
    history: list = field(default_factory=list)


def default_eval_pools(dataset, lengths, splits=("train", "test"), n=0):
    pools = {}
    for key, insts in dataset.pools.items():
        sp, k = key[0], key[1]
        if sp in splits and k in lengths:
            pools[key] = insts[:n] if n else insts
    return pools


def train(cfg, dataset, eval_pools=None, out_dir=None, learner=None, on_eval=None):
    """Run ``cfg.episodes`` training episodes (samples, for the baseline)."""
    if dataset.vocab != vocab_for(cfg.task):
        raise ValueError(f"dataset vocabulary (width {dataset.vocab.width}) does not match task {cfg.task}")
    learner = learner or build_learner(cfg)
    lengths = cfg.length_range
    missing = [k for k in lengths if k not in dataset.lengths("train")]
    if missing:
        raise ValueError(f"dataset has no training data for lengths {missing}")
    curriculum = Curriculum(dataset, lengths)
    driver = curriculum_driver(cfg)
    if eval_pools is None:
        eval_pools = default_eval_pools(dataset, lengths, n=cfg.eval_n)
    report = EvalReport()
    history = []

    def do_eval(ep):
        rows = evaluate(learner, eval_pools, ep).rows
        report.extend(rows)
        if on_eval:
            on_eval(ep, rows)
        if out_dir:
            with open(os.path.join(out_dir, "eval.csv"), "w") as f:
                f.write(report.to_csv())

    def maybe_checkpoint(ep, final=False):
        if out_dir:
            learner.save(os.path.join(out_dir, "checkpoint.txt" if final else f"checkpoint-{ep}.txt"))

    if cfg.model == "rnn":
        _train_baseline(cfg, learner, curriculum, driver, do_eval, maybe_checkpoint, history)
    else:
        _train_crl(cfg, learner, curriculum, driver, do_eval, maybe_checkpoint, history)
    if not report.rows or report.rows[-1].episodes != cfg.episodes:
        do_eval(cfg.episodes)
    maybe_checkpoint(cfg.episodes, final=True)
    return TrainResult(learner, report, driver.all_data_episode, history)


def _due(ep_before, ep_after, every):
    return every > 0 and ep_after // every > ep_before // every


def _train_crl(cfg, ln, curriculum, driver, do_eval, maybe_checkpoint, history):
    mode = cfg.mode()
    buffer = RolloutBuffer()
    n_ppo = 0
    ep = 0
    while ep < cfg.episodes:
        n = min(cfg.k_prime, cfg.episodes - ep)
        pool = curriculum.stage(driver.stage_at(ep)).pool
        traces = collect_rollouts(n, ln.policy, ln.modules, pool, cfg.seed, ep, mode, cfg.rollout_chunk)
        entry = {"episodes": ep + n, "stage": driver.stage_at(ep),
                 "train_acc": float(np.mean([t.correct for t in traces]))}
        if ln.learns_modules:
            entry["module_loss"], entry["module_n"] = module_update(traces, ln.modules, ln.mod_adam)
        if ln.learns_controller:
            buffer.add(traces)
            if len(buffer) >= cfg.k or ep + n == cfg.episodes:
                stats = controller_update(ln.controller, buffer, cfg, ln.ctrl_adam,
                                          stream(cfg.seed, "ppo", n_ppo))
                n_ppo += 1
                buffer.clear()
                entry["ppo"] = stats
        history.append(entry)
        before, ep = ep, ep + n
        if _due(before, ep, cfg.eval_every):
            do_eval(ep)
        if _due(before, ep, cfg.checkpoint_every):
            maybe_checkpoint(ep)


def _train_baseline(cfg, ln, curriculum, driver, do_eval, maybe_checkpoint, history):
    model, adam = ln.baseline, ln.ctrl_adam
    ep, step = 0, 0
    while ep < cfg.episodes:
        n = min(cfg.rnn_batch, cfg.episodes - ep)
        pool = curriculum.stage(driver.stage_at(ep)).pool
        g = stream(cfg.seed, "rnn.batch", step)
        batch = [pool[i] for i in g.integers(0, len(pool), size=n)]
        loss = model.train_step(batch, adam)
        if step % 100 == 0:
            history.append({"episodes": ep + n, "stage": driver.stage_at(ep), "loss": loss})
        step += 1
        before, ep = ep, ep + n
        if _due(before, ep, cfg.eval_every):
            do_eval(ep)
        if _due(before, ep, cfg.checkpoint_every):
            maybe_checkpoint(ep)


def run_ablation(kind, cfg, dataset, **kw):
    """``hcc``, ``hcf``, or a module-count preset name such as ``r3t5`` or ``pathological``."""
    if kind in ("hcc", "hcf"):
        return train(cfg.replace(model=kind, task="numerical"), dataset, **kw)
    mc = preset(kind)
    return train(cfg.replace(model="crl", n_reducers=mc.n_reducers, n_translators=mc.n_translators),
                 dataset, **kw)
