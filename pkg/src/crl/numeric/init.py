import numpy as np

SCHEMES = ("uniform_xavier", "zeros")


def xavier_bound(fan_in, fan_out):
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_params(shape, scheme, rng):
    """Fresh float64 array of ``shape``.

    ``uniform_xavier`` treats the first axis as fan-in and the last as
    fan-out (weights are applied as ``x @ W``).
    """
    shape = tuple(int(s) for s in shape)
    if not shape or any(s <= 0 for s in shape):
        raise ValueError(f"invalid shape {shape}")
    if scheme == "zeros":
        return np.zeros(shape)
    if scheme == "uniform_xavier":
        fan_in, fan_out = (shape[0], shape[-1]) if len(shape) > 1 else (shape[0], shape[0])
        a = xavier_bound(fan_in, fan_out)
        return rng.uniform(-a, a, size=shape)
    raise ValueError(f"unknown init scheme {scheme!r}")
