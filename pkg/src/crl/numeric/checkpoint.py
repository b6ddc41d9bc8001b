"""Plain-text parameter checkpoints.

Layout::

    crl-checkpoint 1
    <name>\t<d0,d1,...>\t<v0 v1 ... in row-major order, %.17g>

17 significant digits make every float64 round-trip exactly.
"""
import numpy as np

MAGIC = "crl-checkpoint 1"


class CheckpointError(ValueError):
    pass


def _fmt(x):
    return "%.17g" % x


def dumps(arrays):
    lines = [MAGIC]
    for name, a in arrays.items():
        if "\t" in name or "\n" in name:
            raise CheckpointError(f"bad parameter name {name!r}")
        a = np.asarray(a, dtype=np.float64)
        shape = ",".join(str(s) for s in a.shape)
        lines.append(f"{name}\t{shape}\t{' '.join(map(_fmt, a.ravel()))}")
    return "\n".join(lines) + "\n"


def loads(text):
    lines = text.splitlines()
    if not lines or lines[0] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad header)")
    out = {}
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        try:
            name, shape_s, vals = line.split("\t")
            shape = tuple(int(s) for s in shape_s.split(",")) if shape_s else ()
            data = np.array([float(v) for v in vals.split()], dtype=np.float64)
            out[name] = data.reshape(shape)
        except ValueError as e:
            raise CheckpointError(f"line {i}: {e}") from None
    return out


def save(path, arrays):
    with open(path, "w") as f:
        f.write(dumps(arrays))


def load(path):
    with open(path) as f:
        return loads(f.read())
