"""Arithmetic problems over one or five token "languages".

Each language is a block of 13 token ids: digits 0-9 at local ids 0-9 and
the operators +, *, - at local ids 10, 11, 12.  Token id = 13 * language +
local id.  The multilingual vocabulary appends one STOP token (id 65) that
only the recurrent baseline reads.

A problem pairs an input expression in a source language with its value
mod 10 written as a single digit of the target language.
"""
import json
import os
from dataclasses import dataclass, field

import numpy as np

BLOCK = 13
N_LANGS = 5
PLUS, TIMES, MINUS = 10, 11, 12
OP_LOCAL = {"+": PLUS, "*": TIMES, "-": MINUS}
LOCAL_OP = {v: k for k, v in OP_LOCAL.items()}
OPERATORS = ("+", "*", "-")

LANG_NAMES = ("numerals", "english", "spanish", "piglatin", "glyph")
_SURFACE = (
    tuple("0123456789") + ("+", "*", "-"),
    ("zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
     "plus", "times", "minus"),
    ("cero", "uno", "dos", "tres", "cuatro", "cinco", "seis", "siete", "ocho", "nueve",
     "mas", "por", "menos"),
    ("erozay", "oneway", "otway", "eethray", "ourfay", "ivefay", "ixsay", "evensay",
     "eightway", "inenay", "usplay", "imestay", "inusmay"),
    # invented fifth script; only used for display
    ("qa", "qe", "qi", "qo", "qu", "za", "ze", "zi", "zo", "zu", "pla", "tim", "min"),
)


@dataclass(frozen=True)
class Vocab:
    n_langs: int
    stop: bool = False

    @property
    def width(self):
        return BLOCK * self.n_langs + (1 if self.stop else 0)

    @property
    def stop_id(self):
        if not self.stop:
            raise ValueError("vocabulary has no STOP token")
        return BLOCK * self.n_langs

    def token(self, lang, local):
        if not 0 <= lang < self.n_langs or not 0 <= local < BLOCK:
            raise ValueError(f"no token for language {lang}, local id {local}")
        return BLOCK * lang + local

    def split(self, token_id):
        """(language, local id) of a token; STOP maps to (None, None)."""
        if self.stop and token_id == self.stop_id:
            return None, None
        if not 0 <= token_id < BLOCK * self.n_langs:
            raise ValueError(f"token id {token_id} outside vocabulary of width {self.width}")
        return divmod(int(token_id), BLOCK)

    def symbol(self, token_id):
        lang, local = self.split(token_id)
        if lang is None:
            return "<stop>"
        return _SURFACE[lang][local]


NUMERICAL = Vocab(1, stop=False)
MULTILINGUAL = Vocab(N_LANGS, stop=True)


def vocab_for(task):
    if task == "numerical":
        return NUMERICAL
    if task == "multilingual":
        return MULTILINGUAL
    raise ValueError(f"unknown task {task!r}")


@dataclass(frozen=True)
class Expression:
    terms: tuple
    ops: tuple

    def __post_init__(self):
        if len(self.terms) < 1 or len(self.ops) != len(self.terms) - 1:
            raise ValueError("expression needs k >= 1 terms and k - 1 operators")
        if any(not 0 <= t <= 9 for t in self.terms) or any(o not in OP_LOCAL for o in self.ops):
            raise ValueError(f"malformed expression {self.terms} {self.ops}")

    @property
    def k(self):
        return len(self.terms)

    def local_tokens(self):
        out = [self.terms[0]]
        for o, t in zip(self.ops, self.terms[1:]):
            out += [OP_LOCAL[o], t]
        return tuple(out)

    def surface(self, lang, vocab=MULTILINGUAL):
        return tuple(vocab.token(lang, x) for x in self.local_tokens())

    def __str__(self):
        return "".join(str(x) if x < 10 else LOCAL_OP[x] for x in self.local_tokens())

    @classmethod
    def parse(cls, text):
        text = text.replace(" ", "").replace("×", "*").replace("−", "-")
        return cls.from_local(tuple(int(c) if c.isdigit() else OP_LOCAL[c] for c in text))

    @classmethod
    def from_local(cls, local):
        if len(local) % 2 == 0:
            raise ValueError("token sequence must alternate digit/operator with odd length")
        terms = tuple(int(x) for x in local[0::2])
        try:
            ops = tuple(LOCAL_OP[x] for x in local[1::2])
        except KeyError:
            raise ValueError(f"non-operator in operator slot: {local}") from None
        return cls(terms, ops)


def eval_mod10(expr):
    """Value of ``expr`` mod 10 with * binding tighter than + and -.

    Runs of products are folded first; the resulting terms are then summed
    left to right.  Every partial result is kept in [0, 9].
    """
    total, sign, prod = 0, 1, expr.terms[0] % 10
    for op, t in zip(expr.ops, expr.terms[1:]):
        if op == "*":
            prod = prod * t % 10
        else:
            total = (total + sign * prod) % 10
            sign = 1 if op == "+" else -1
            prod = t % 10
    return (total + sign * prod) % 10


def apply_op(a, op, b):
    """Single binary step mod 10, as a reducer should compute it."""
    if op == "+":
        return (a + b) % 10
    if op == "*":
        return a * b % 10
    if op == "-":
        return (a - b) % 10
    raise ValueError(f"unknown operator {op!r}")


def gen_expression(k, rng):
    if k < 1:
        raise ValueError(f"expressions need at least one term, got k={k}")
    terms = tuple(int(x) for x in rng.integers(0, 10, size=k))
    ops = tuple(OPERATORS[i] for i in rng.integers(0, 3, size=k - 1))
    return Expression(terms, ops)


def problem_space_size(k, n_pairs=1):
    """Exact count of distinct k-term problems over ``n_pairs`` language pairs."""
    return 10 ** k * 3 ** (k - 1) * n_pairs


@dataclass(frozen=True)
class ProblemInstance:
    expression: Expression
    src: int = 0
    tgt: int = 0
    vocab: Vocab = NUMERICAL

    @property
    def tokens(self):
        return self.expression.surface(self.src, self.vocab)

    @property
    def value(self):
        return eval_mod10(self.expression)

    @property
    def answer(self):
        return self.vocab.token(self.tgt, self.value)

    @property
    def length(self):
        return self.expression.k

    @property
    def key(self):
        return (self.expression, self.src, self.tgt)


def encode(ids, vocab):
    """One-hot rows, shape (len(ids), vocab.width)."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1 or ids.size == 0:
        raise ValueError("encode needs a non-empty 1-D id sequence")
    if ids.min() < 0 or ids.max() >= vocab.width:
        raise ValueError(f"token id out of range for vocabulary width {vocab.width}: {ids.tolist()}")
    out = np.zeros((ids.size, vocab.width))
    out[np.arange(ids.size), ids] = 1.0
    return out


def decode(rows):
    return tuple(int(i) for i in np.argmax(np.asarray(rows), axis=1))


def select_language_pairs(rng, n_langs=N_LANGS):
    """Hold out one target per source along a random permutation.

    Returns (training pairs, held-out pairs).  Held-out sources and targets
    are each a permutation of the languages, so every language is seen with
    n_langs - 1 partners in training on both sides.
    """
    perm = rng.permutation(n_langs)
    held = tuple((i, int(perm[i])) for i in range(n_langs))
    train = tuple((s, t) for s in range(n_langs) for t in range(n_langs) if (s, t) not in held)
    return train, held


SPLITS = ("train", "val", "test")
NUMERICAL_SCALES = {1e3: 1, 1e4: 10}


def base_count(k):
    return 210 if k == 2 else 700


def _split_sizes(n):
    # integer arithmetic: int(0.7 * 700) is 489
    n_train = 7 * n // 10
    n_val = 15 * n // 100
    return n_train, n_val, n - n_train - n_val


def _distinct(k, pair, n, rng, vocab, exclude=()):
    seen = set(exclude)
    out = []
    while len(out) < n:
        inst = ProblemInstance(gen_expression(k, rng), pair[0], pair[1], vocab)
        if inst.key in seen:
            continue
        seen.add(inst.key)
        out.append(inst)
    return out


@dataclass
class Dataset:
    """Pools of instances keyed by (split, length, src, tgt)."""

    task: str
    vocab: Vocab
    pools: dict
    train_pairs: tuple = ((0, 0),)
    heldout_pairs: tuple = ()
    meta: dict = field(default_factory=dict)

    def instances(self, split=None, lengths=None, pairs=None):
        out = []
        for (sp, k, s, t), pool in sorted(self.pools.items()):
            if split is not None and sp != split:
                continue
            if lengths is not None and k not in lengths:
                continue
            if pairs is not None and (s, t) not in pairs:
                continue
            out.extend(pool)
        return out

    def lengths(self, split="train"):
        return sorted({k for (sp, k, _, _) in self.pools if sp == split})

    def counts(self):
        return {key: len(v) for key, v in self.pools.items()}

    def __len__(self):
        return sum(len(v) for v in self.pools.values())


def _split_pool(pools, k, pair, insts):
    a, b, _ = _split_sizes(len(insts))
    pools[("train", k, *pair)] = tuple(insts[:a])
    pools[("val", k, *pair)] = tuple(insts[a:a + b])
    pools[("test", k, *pair)] = tuple(insts[a + b:])


def build_numerical_dataset(scale, rng, lengths=range(2, 11)):
    """Table-A.1 style pools: 210 two-term and 700 k-term expressions per length.

    ``scale`` 1e3 gives the base counts, 1e4 multiplies them by ten.  Counts
    larger than the problem space are capped and listed in ``meta['capped']``.
    """
    try:
        mult = NUMERICAL_SCALES[float(scale)]
    except KeyError:
        raise ValueError(f"scale must be one of {sorted(NUMERICAL_SCALES)}, got {scale}") from None
    pools, capped = {}, {}
    for k in lengths:
        want = base_count(k) * mult
        space = problem_space_size(k)
        if want > space:
            capped[k] = (want, space)
            want = space
        _split_pool(pools, k, (0, 0), _distinct(k, (0, 0), want, rng, NUMERICAL))
    meta = {"scale": float(scale), "capped": {str(k): list(v) for k, v in capped.items()}}
    return Dataset("numerical", NUMERICAL, pools, ((0, 0),), (), meta)


def build_multilingual_dataset(rng, pairs=None, lengths=(2, 3, 4, 5), heldout_lengths=(5, 10),
                               heldout_n=700):
    """Per training pair 210 two-term and 700 k-term expressions for k = 3..5.

    Held-out pairs get ``heldout_n`` fresh instances per length in
    ``heldout_lengths`` under split "heldout".
    """
    if pairs is None:
        pairs = select_language_pairs(rng)
    train_pairs, held = pairs
    pools = {}
    for k in lengths:
        for pair in train_pairs:
            _split_pool(pools, k, pair, _distinct(k, pair, base_count(k), rng, MULTILINGUAL))
    for k in heldout_lengths:
        for pair in held:
            pools[("heldout", k, *pair)] = tuple(_distinct(k, pair, heldout_n, rng, MULTILINGUAL))
    meta = {"heldout_lengths": list(heldout_lengths), "heldout_n": heldout_n}
    return Dataset("multilingual", MULTILINGUAL, pools, tuple(train_pairs), tuple(held), meta)


def gen_extrapolation_set(lengths, pairs, n, rng, vocab=NUMERICAL, exclude=(), split="extrap"):
    """``n`` fresh instances per (length, pair), avoiding keys in ``exclude``."""
    pools = {}
    excl = {getattr(x, "key", x) for x in exclude}
    for k in lengths:
        for pair in pairs:
            pools[(split, k, *pair)] = tuple(_distinct(k, pair, n, rng, vocab, excl))
    return pools


@dataclass(frozen=True)
class CurriculumStage:
    index: int
    max_length: int
    pool: tuple


class Curriculum:
    """Expanding training pool: stage s admits lengths up to ``lengths[s]``."""

    def __init__(self, dataset, lengths=None, split="train"):
        self.lengths = tuple(lengths or dataset.lengths(split))
        self.dataset = dataset
        self.split = split
        self._stages = []
        pool = []
        for i, max_len in enumerate(self.lengths):
            pool = pool + dataset.instances(split, lengths=[max_len], pairs=dataset.train_pairs)
            self._stages.append(CurriculumStage(i, max_len, tuple(pool)))

    def __len__(self):
        return len(self._stages)

    def stage(self, index):
        if not 0 <= index < len(self._stages):
            raise IndexError(f"curriculum has stages 0..{len(self._stages) - 1}, asked for {index}")
        return self._stages[index]

    @property
    def final(self):
        return self._stages[-1]


def curriculum_pool(stage):
    return stage.pool


def sample_from(stage, rng, n):
    idx = rng.integers(0, len(stage.pool), size=n)
    return [stage.pool[i] for i in idx]


# -- files -----------------------------------------------------------------

def format_instance(inst):
    ids = " ".join(str(i) for i in inst.tokens)
    return f"{inst.src}\t{inst.tgt}\t{ids}\t{inst.answer}"


def parse_instance(line, vocab):
    src, tgt, ids, answer = line.rstrip("\n").split("\t")
    ids = [int(x) for x in ids.split()]
    local = tuple(vocab.split(i)[1] for i in ids)
    inst = ProblemInstance(Expression.from_local(local), int(src), int(tgt), vocab)
    if inst.answer != int(answer):
        raise ValueError(f"answer {answer} does not match expression value in line {line!r}")
    return inst


def write_dataset(path, dataset, seed=None):
    """Write one ``<split>.tsv`` per split plus ``manifest.json``."""
    os.makedirs(path, exist_ok=True)
    by_split = {}
    for (sp, k, s, t), pool in sorted(dataset.pools.items()):
        by_split.setdefault(sp, []).extend(pool)
    for sp, insts in by_split.items():
        with open(os.path.join(path, f"{sp}.tsv"), "w") as f:
            for inst in insts:
                f.write(format_instance(inst) + "\n")
    manifest = {
        "task": dataset.task,
        "seed": seed,
        "vocab_width": dataset.vocab.width,
        "train_pairs": [list(p) for p in dataset.train_pairs],
        "heldout_pairs": [list(p) for p in dataset.heldout_pairs],
        "counts": {f"{sp}/{k}/{s}-{t}": len(v) for (sp, k, s, t), v in sorted(dataset.pools.items())},
        "meta": dataset.meta,
    }
    with open(os.path.join(path, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
        f.write("\n")
    return manifest


def read_dataset(path):
    with open(os.path.join(path, "manifest.json")) as f:
        manifest = json.load(f)
    vocab = vocab_for(manifest["task"])
    if manifest["vocab_width"] != vocab.width:
        raise ValueError("manifest vocabulary width does not match its task")
    pools = {}
    for name in sorted(os.listdir(path)):
        if not name.endswith(".tsv"):
            continue
        sp = name[:-4]
        with open(os.path.join(path, name)) as f:
            for line in f:
                if line.strip():
                    inst = parse_instance(line, vocab)
                    pools.setdefault((sp, inst.length, inst.src, inst.tgt), []).append(inst)
    pools = {k: tuple(v) for k, v in pools.items()}
    ds = Dataset(manifest["task"], vocab, pools,
                 tuple(tuple(p) for p in manifest["train_pairs"]),
                 tuple(tuple(p) for p in manifest["heldout_pairs"]),
                 dict(manifest.get("meta", {}), seed=manifest.get("seed")))
    return ds


def display(ids, vocab):
    """Readable surface form; numerals stay compact, words are space separated."""
    syms = [vocab.symbol(i) for i in ids]
    if all(len(s) == 1 for s in syms):
        return "".join(syms)
    return " ".join(syms)
