"""Learn a reducer with the order-of-operations controller held fixed (HCC).

With the routing hardcoded, the only thing left to learn is a single
window -> token map.  Module supervision flows back through whole chains of
reductions, so the reducer picks up the 300 two-term facts from multi-step
episodes too.

Run: python3 demos/learn_the_reducer.py      (under a minute)
"""
from crl.cli import make_dataset
from crl.meta_mdp import render_trace, run_episodes
from crl.numeric import stream
from crl.training import TrainConfig, train

ds = make_dataset("numerical", 1, seed=0)
cfg = TrainConfig(model="hcc", episodes=30_000, lengths="2:3", curriculum_every=10_000,
                  lr_modules=3e-2, eval_every=5_000)


def show(ep, rows):
    print(f"{ep:>6} episodes  " + "  ".join(f"{r.split}/{r.length}={r.accuracy:.2f}" for r in rows))


res = train(cfg, ds, on_eval=show)

# Longer than anything trained on: the learned reducer is reused step by step.
# Each annotation is what the module produced, right or wrong.
probe = ds.instances("test", [6])[:3]
for p, t in zip(probe, run_episodes(res.learner.policy, res.learner.modules, probe, cfg.mode(),
                                    [stream(0, "demo", i) for i in range(3)], greedy=True)):
    print(render_trace(t))
    print(f"answer {p.answer}, correct={t.correct}\n")
