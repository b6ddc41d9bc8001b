"""Command line: ``crl generate | train | eval | trace | export``.

Failures exit with status 2 and print one line ``error: <category>: <message>``.
"""
import argparse
import glob
import os
import sys

from .config import ExperimentConfig, config_keys, output_root, resolve
from .meta_mdp import dump_traces, run_episodes
from .numeric import stream
from .numeric.checkpoint import CheckpointError
from .problem_graph import (build_multilingual_dataset, build_numerical_dataset, gen_extrapolation_set,
                            read_dataset, write_dataset)
from .training import (EvalReport, aggregate, aggregate_csv, build_learner, evaluate, parse_lengths,
                       train)

SCALES = {1: 1e3, 10: 1e4}


class CliError(Exception):
    def __init__(self, category, message):
        super().__init__(message)
        self.category = category


def _read(path):
    with open(path) as f:
        return f.read()


def _write(path, text):
    with open(path, "w") as f:
        f.write(text)


def _fresh_dir(path, force):
    if os.path.exists(path) and os.listdir(path) and not force:
        raise CliError("exists", f"{path} is not empty (use --force to overwrite)")
    os.makedirs(path, exist_ok=True)


def _out_path(arg, default_name):
    if arg:
        return arg
    return os.path.join(output_root(), default_name)


def make_dataset(task, data_scale, seed):
    rng = stream(seed, "data")
    if task == "numerical":
        if data_scale not in SCALES:
            raise CliError("config", f"data scale must be 1 or 10, got {data_scale}")
        return build_numerical_dataset(SCALES[data_scale], rng)
    if data_scale != 1:
        raise CliError("config", "the multilingual dataset has a single scale")
    return build_multilingual_dataset(rng)


def load_dataset(path):
    if not os.path.exists(os.path.join(path, "manifest.json")):
        raise CliError("missing", f"no dataset at {path} (manifest.json not found)")
    return read_dataset(path)


def check_dataset(exp, ds):
    tc = exp.train
    if ds.task != tc.task:
        raise CliError("mismatch", f"dataset is for task {ds.task}, config says {tc.task}")
    if ds.task == "numerical":
        scale = ds.meta.get("scale")
        if scale is not None and SCALES.get(tc.data_scale) != scale:
            raise CliError("mismatch", f"dataset scale {scale:g} does not match data_scale={tc.data_scale}")


# -- generate ---------------------------------------------------------------

def cmd_generate(args):
    out = _out_path(args.out, f"data-{args.task}")
    _fresh_dir(out, args.force)
    ds = make_dataset(args.task, args.data_scale, args.seed)
    manifest = write_dataset(out, ds, seed=args.seed)
    per_split = {}
    for key, n in manifest["counts"].items():
        split = key.split("/", 1)[0]
        per_split[split] = per_split.get(split, 0) + n
    print(f"wrote {len(ds)} instances to {out}: " + ", ".join(f"{k} {v}" for k, v in sorted(per_split.items())))


# -- train ------------------------------------------------------------------

def _overrides(args):
    o = {}
    for kv in args.set or []:
        if "=" not in kv:
            raise CliError("usage", f"--set expects key=value, got {kv!r}")
        k, v = kv.split("=", 1)
        o[k.strip()] = v.strip()
    named = {"model": args.model, "task": args.task, "data_scale": args.data_scale,
             "episodes": args.episodes, "seed": args.seed, "seeds": args.seeds,
             "data": args.data, "output": args.out, "lengths": args.lengths}
    o.update({k: v for k, v in named.items() if v is not None})
    if args.no_curriculum:
        o["curriculum"] = "false"
    return o


def load_experiment(config_path=None, overrides=None):
    text = _read(config_path) if config_path else None
    try:
        return resolve(text, overrides), text
    except (KeyError, ValueError) as e:
        raise CliError("config", str(e.args[0] if e.args else e)) from None


def cmd_train(args):
    exp, source = load_experiment(args.config, _overrides(args))
    out = _out_path(exp.output, f"{exp.train.task}-{exp.train.model}")
    _fresh_dir(out, args.force)
    exp.output = os.path.abspath(out)
    if exp.data:
        exp.data = os.path.abspath(exp.data)
        ds = load_dataset(exp.data)
    else:
        ds = make_dataset(exp.train.task, exp.train.data_scale, exp.data_seed)
    check_dataset(exp, ds)
    _write(os.path.join(out, "config.txt"), exp.to_text())
    if source is not None:
        _write(os.path.join(out, "config.source.txt"), source)
    for tc in exp.seed_configs():
        sub = os.path.join(out, f"seed-{tc.seed}")
        os.makedirs(sub, exist_ok=True)
        one = ExperimentConfig(tc, 1, exp.data, exp.data_seed, sub)
        _write(os.path.join(sub, "config.txt"), one.to_text())
        try:
            res = train(tc, ds, out_dir=sub)
        except ValueError as e:
            raise CliError("config", str(e)) from None
        last = max(r.episodes for r in res.report.rows)
        summary = ", ".join(f"{r.split}/{r.length}={r.accuracy:.3f}" for r in res.report.rows
                            if r.episodes == last)
        print(f"seed {tc.seed}: {summary}")
    print(f"run written to {out}")


# -- eval / trace -----------------------------------------------------------

def seed_dirs(path):
    if os.path.exists(os.path.join(path, "checkpoint.txt")):
        return [path]
    dirs = sorted(glob.glob(os.path.join(path, "seed-*")), key=lambda p: int(p.rsplit("-", 1)[1]))
    dirs = [d for d in dirs if os.path.exists(os.path.join(d, "checkpoint.txt"))]
    if not dirs:
        raise CliError("missing", f"no checkpoint under {path}")
    return dirs


def load_learner(run_dir):
    cfg_path = os.path.join(run_dir, "config.txt")
    if not os.path.exists(cfg_path):
        raise CliError("missing", f"no config.txt in {run_dir}")
    exp, _ = load_experiment(cfg_path)
    ln = build_learner(exp.train)
    try:
        ln.load(os.path.join(run_dir, "checkpoint.txt"))
    except FileNotFoundError:
        raise CliError("missing", f"no checkpoint.txt in {run_dir}") from None
    except CheckpointError as e:
        raise CliError("checkpoint", str(e)) from None
    return exp, ln


def eval_pools(exp, ds, lengths, split, heldout_only, n):
    """Dataset pools where they exist, fresh extrapolation instances elsewhere."""
    if heldout_only:
        if not ds.heldout_pairs:
            raise CliError("config", "this dataset has no held-out language pairs")
        pairs, split = ds.heldout_pairs, "heldout"
    else:
        pairs = ds.train_pairs
    pools = {}
    for k in lengths:
        have = {key: v for key, v in ds.pools.items()
                if key[0] == split and key[1] == k and key[2:] in pairs}
        if have:
            pools.update({key: v[:n] if n else v for key, v in have.items()})
        else:
            pools.update(gen_extrapolation_set([k], pairs, n or 100, stream(exp.data_seed, "extrap", k),
                                               ds.vocab, exclude=ds.instances(), split=split))
    return pools


def _eval_context(args):
    dirs = seed_dirs(args.run)
    first, _ = load_experiment(os.path.join(dirs[0], "config.txt"))
    data = args.data or first.data
    ds = load_dataset(data) if data else make_dataset(first.train.task, first.train.data_scale, first.data_seed)
    check_dataset(first, ds)
    return dirs, first, ds


def cmd_eval(args):
    dirs, first, ds = _eval_context(args)
    lengths = parse_lengths(args.lengths) if args.lengths else first.train.length_range
    pools = eval_pools(first, ds, lengths, args.split, args.heldout_only, args.n)
    report = EvalReport()
    for d in dirs:
        exp, ln = load_learner(d)
        report.extend(evaluate(ln, pools, exp.train.episodes).rows)
    text = report.to_csv()
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)


def cmd_trace(args):
    dirs, first, ds = _eval_context(args)
    exp, ln = load_learner(dirs[0])
    if ln.baseline is not None:
        raise CliError("config", "the recurrent baseline has no execution traces")
    lengths = parse_lengths(args.lengths) if args.lengths else exp.train.length_range[-1:]
    pools = eval_pools(exp, ds, lengths, args.split, args.heldout_only, 0)
    insts = [p for _, v in sorted(pools.items()) for p in v]
    g = stream(args.seed, "trace")
    pick = [insts[i] for i in g.choice(len(insts), size=min(args.n, len(insts)), replace=False)]
    rngs = [stream(args.seed, "trace.episode", i) for i in range(len(pick))]
    traces = run_episodes(ln.policy, ln.modules, pick, exp.train.mode(), rngs, greedy=not args.sample)
    out = args.out or os.path.join(dirs[0], "traces.txt")
    dump_traces(out, traces, seed=exp.train.seed)
    print(f"wrote {len(traces)} traces to {out}")


# -- export -----------------------------------------------------------------

def cmd_export(args):
    if not os.path.isdir(args.run):
        raise CliError("missing", f"{args.run} is not a directory")
    dirs = sorted(glob.glob(os.path.join(args.run, "seed-*")))
    dirs = [d for d in dirs if os.path.exists(os.path.join(d, "eval.csv"))]
    if not dirs:
        raise CliError("missing", f"no seed runs with eval.csv under {args.run}")
    reports, ref = [], None
    for d in dirs:
        exp, _ = load_experiment(os.path.join(d, "config.txt"))
        key = exp.train.replace(seed=0).to_text()
        if ref is None:
            ref = key
        elif key != ref:
            raise CliError("mismatch", f"{d} was trained with a different configuration")
        reports.append(EvalReport.from_csv(_read(os.path.join(d, "eval.csv"))))
    text = aggregate_csv(aggregate(reports))
    out = args.out or os.path.join(args.run, "aggregate.csv")
    _write(out, text)
    print(f"aggregated {len(reports)} seed runs into {out}")


# -- parser -----------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="crl", description="Compositional recursive learner experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a dataset and its manifest")
    g.add_argument("--task", choices=("numerical", "multilingual"), default="numerical")
    g.add_argument("--data-scale", type=int, default=1, choices=(1, 10))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.add_argument("--force", action="store_true")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train one or more seeds",
                       epilog="config keys: " + ", ".join(config_keys()))
    t.add_argument("--config", help="flat key=value file")
    t.add_argument("--data", help="dataset directory (generated from the config when omitted)")
    t.add_argument("--out")
    t.add_argument("--model", choices=("crl", "rnn", "hcc", "hcf"))
    t.add_argument("--task", choices=("numerical", "multilingual"))
    t.add_argument("--data-scale", type=int, choices=(1, 10))
    t.add_argument("--episodes", type=int)
    t.add_argument("--lengths", help="curriculum lengths, e.g. 2:5")
    t.add_argument("--no-curriculum", action="store_true")
    t.add_argument("--seed", type=int, help="first seed")
    t.add_argument("--seeds", type=int, help="number of seeds")
    t.add_argument("--set", action="append", metavar="KEY=VALUE", help="any config key")
    t.add_argument("--force", action="store_true")
    t.set_defaults(func=cmd_train)

    for name, func, helptext in (("eval", cmd_eval, "accuracy table for a trained run"),
                                 ("trace", cmd_trace, "dump rendered execution traces")):
        e = sub.add_parser(name, help=helptext)
        e.add_argument("run", help="run directory or one seed-* directory")
        e.add_argument("--data")
        e.add_argument("--lengths", help="e.g. 6:100 or 5,10,20")
        e.add_argument("--split", default="test")
        e.add_argument("--heldout-only", action="store_true", help="only the held-out language pairs")
        e.add_argument("--out")
        if name == "eval":
            e.add_argument("--n", type=int, default=0, help="instances per pool (0 = all; 100 for new lengths)")
        else:
            e.add_argument("-n", type=int, default=5)
            e.add_argument("--seed", type=int, default=0)
            e.add_argument("--sample", action="store_true", help="sample actions instead of greedy")
        e.set_defaults(func=func)

    x = sub.add_parser("export", help="percentile table over seeds")
    x.add_argument("run")
    x.add_argument("--out")
    x.set_defaults(func=cmd_export)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except CliError as e:
        print(f"error: {e.category}: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: io: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
