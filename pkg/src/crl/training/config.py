"""Run configuration as one flat, text-serialisable dataclass."""
from dataclasses import dataclass, fields

from ..meta_mdp import Bounded, Infinite

MODELS = ("crl", "rnn", "hcc", "hcf")
TASKS = ("numerical", "multilingual")


@dataclass
class TrainConfig:
    task: str = "numerical"
    model: str = "crl"
    episodes: int = 10 ** 6
    # cadence: controller every k episodes, modules every k_prime
    k: int = 1024
    k_prime: int = 256
    clip_eps: float = 0.2
    ppo_epochs: int = 4
    minibatch: int = 256
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    normalize_advantages: bool = False
    lr_controller: float = 3e-4
    lr_modules: float = 1e-3
    controller_hidden: int = 128
    module_hidden: int = 128
    n_reducers: int = 1
    n_translators: int = 0
    shared_encoder: bool = True
    horizon: str = "infinite"
    step_penalty: float = -0.01
    halt_noop: bool = True
    step_cap: int = 0
    bounded_extra: int = 0
    curriculum: bool = True
    curriculum_every: int = 10 ** 5
    rnn_curriculum_every: int = 5 * 10 ** 4
    lengths: str = "2:10"
    data_scale: int = 1
    rnn_hidden: int = 128
    rnn_batch: int = 64
    lr_rnn: float = 1e-3
    eval_every: int = 0
    eval_n: int = 0
    checkpoint_every: int = 0
    rollout_chunk: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.k <= 0 or self.k_prime <= 0 or self.k_prime > self.k:
            raise ValueError("need 0 < k_prime <= k")
        if self.k % self.k_prime:
            raise ValueError("k must be a multiple of k_prime")
        if self.horizon not in ("infinite", "bounded"):
            raise ValueError(f"horizon must be 'infinite' or 'bounded', got {self.horizon!r}")
        if self.model in ("hcc", "hcf") and self.task != "numerical":
            raise ValueError(f"{self.model} ablation is defined for the numerical task only")

    @property
    def length_range(self):
        return parse_lengths(self.lengths)

    def mode(self):
        if self.horizon == "infinite":
            return Infinite(self.step_penalty, self.halt_noop, self.step_cap or None)
        extra = self.bounded_extra
        return lambda problem: Bounded(problem.length - 1 + extra)

    # -- flat text form -------------------------------------------------

    def to_text(self):
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in fields(self))

    @classmethod
    def from_dict(cls, values):
        kinds = {f.name: f.type for f in fields(cls)}
        out = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in kinds:
                raise KeyError(f"unknown config key {key!r}")
            try:
                out[key] = _coerce(kinds[key], raw)
            except ValueError:
                raise ValueError(f"{key}: cannot parse {raw!r}") from None
        return cls(**out)

    @classmethod
    def from_text(cls, text):
        return cls.from_dict(parse_flat(text))

    def replace(self, **changes):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return type(self)(**d)


def parse_flat(text):
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected key=value, got {line!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def _coerce(kind, raw):
    if not isinstance(raw, str):
        return raw
    if kind in (bool, "bool"):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind in (int, "int"):
        return int(float(raw)) if "e" in raw.lower() else int(raw)
    if kind in (float, "float"):
        return float(raw)
    return raw


def parse_lengths(text):
    """``"2:5"`` -> (2, 3, 4, 5); ``"5,10,20"`` -> (5, 10, 20)."""
    text = str(text)
    if ":" in text:
        lo, hi = text.split(":")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(x) for x in text.split(",") if x)
