"""On-disk formats, image tensorization, observation masks and reports.

Binary layouts (all integers unsigned 32-bit little-endian, all reals 64-bit
little-endian IEEE-754, arrays row-major)::

    TNSR: b"TNSR" | version=1 (1 byte) | p | dims[p] | data[prod(dims)]
    TNET: b"TNET" | version=1 (1 byte) | p | dims[p] | R[i,j] for i<j | cores

Reports are line-oriented text: a fixed header line, then one
``key<TAB>json`` record per line.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .als import AlsConfig, ObservationSet
from .network import TensorNetwork, edge_list, param_count
from .search import GreedyConfig, SearchTrace
from .transfer import SliceInitPolicy

TENSOR_MAGIC = b"TNSR"
NETWORK_MAGIC = b"TNET"
VERSION = 1
REPORT_HEADER = "# greedy-tn report v1"


class FormatError(ValueError):
    """Malformed binary file; ``offset`` is where decoding failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        have = len(self.buf) - self.pos
        if have < n:
            raise FormatError(f"truncated {what}: expected {n} bytes, found {have}", self.pos)
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32s(self, n: int, what: str) -> list[int]:
        return list(struct.unpack(f"<{n}I", self.take(4 * n, what)))

    def reals(self, n: int, what: str) -> np.ndarray:
        return np.frombuffer(self.take(8 * n, what), dtype="<f8").astype(np.float64)

    def header(self, magic: bytes) -> list[int]:
        got = self.take(4, "magic")
        if got != magic:
            raise FormatError(f"bad magic {got!r}, expected {magic!r}", 0)
        version = self.take(1, "version")[0]
        if version != VERSION:
            raise FormatError(f"unsupported version {version}, expected {VERSION}", 4)
        (p,) = self.u32s(1, "order")
        start = self.pos
        dims = self.u32s(p, "dims")
        for k, d in enumerate(dims):
            if d == 0:
                raise FormatError(f"dim {k} is 0, dims must be >= 1", start + 4 * k)
        return dims

    def finish(self):
        extra = len(self.buf) - self.pos
        if extra:
            raise FormatError(
                f"payload length mismatch: expected {self.pos} bytes, found {len(self.buf)}",
                self.pos,
            )


def _header(magic: bytes, dims) -> bytes:
    dims = [int(d) for d in dims]
    return magic + bytes([VERSION]) + struct.pack(f"<I{len(dims)}I", len(dims), *dims)


def encode_tensor(t) -> bytes:
    t = np.asarray(t, dtype=np.float64)
    return _header(TENSOR_MAGIC, t.shape) + t.astype("<f8").tobytes(order="C")


def decode_tensor(buf: bytes) -> np.ndarray:
    r = _Reader(buf)
    dims = r.header(TENSOR_MAGIC)
    data = r.reals(math.prod(dims), "tensor payload")
    r.finish()
    return data.reshape(dims)


def encode_network(net: TensorNetwork) -> bytes:
    out = [_header(NETWORK_MAGIC, net.dims)]
    upper = [int(net.ranks[i, j]) for i in range(net.p) for j in range(i + 1, net.p)]
    out.append(struct.pack(f"<{len(upper)}I", *upper))
    out.extend(np.asarray(c, dtype="<f8").tobytes(order="C") for c in net.cores)
    return b"".join(out)


def decode_network(buf: bytes) -> TensorNetwork:
    r = _Reader(buf)
    dims = r.header(NETWORK_MAGIC)
    p = len(dims)
    n_upper = p * (p - 1) // 2
    offset = r.pos
    upper = r.u32s(n_upper, "rank entries")
    if any(v == 0 for v in upper):
        raise FormatError("ranks must be >= 1", offset)
    ranks = np.ones((p, p), dtype=np.int64)
    it = iter(upper)
    for i in range(p):
        for j in range(i + 1, p):
            ranks[i, j] = ranks[j, i] = next(it)
    cores = []
    for k in range(p):
        shape = [dims[k] if j == k else int(ranks[k, j]) for j in range(p)]
        cores.append(r.reals(math.prod(shape), f"core {k}").reshape(shape))
    r.finish()
    return TensorNetwork(tuple(cores))


def write_tensor(path, t) -> None:
    Path(path).write_bytes(encode_tensor(t))


def read_tensor(path) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())


def write_network(path, net: TensorNetwork) -> None:
    Path(path).write_bytes(encode_network(net))


def read_network(path) -> TensorNetwork:
    return decode_network(Path(path).read_bytes())


# image tensorization

PRESETS = {
    "einstein": ((6, 10, 10), (6, 10, 10), False),
    "live4x8": ((4, 4, 4, 4), (4, 4, 4, 4), True),
}


def parse_preset(name: str):
    """Return ``(row_factors, col_factors, interleave)`` for a preset name.

    ``custom:6x10x10/6x10x10`` gives explicit row and column factors.
    """
    if name in PRESETS:
        return PRESETS[name]
    if name.startswith("custom:"):
        try:
            rows, cols = name[len("custom:"):].split("/")
            rf = tuple(int(f) for f in rows.split("x"))
            cf = tuple(int(f) for f in cols.split("x"))
        except ValueError:
            raise ValueError(
                f"bad custom preset {name!r}; use custom:<f1>x<f2>.../<g1>x<g2>..."
            ) from None
        return rf, cf, False
    raise ValueError(f"unknown preset {name!r}; choose einstein, live4x8 or custom:...")


def _interleave_axes(n_row, n_col):
    if n_row != n_col:
        raise ValueError("interleaving needs the same number of row and column factors")
    return [a for k in range(n_row) for a in (k, n_row + k)]


def tensorize_image(pixels, row_factors, col_factors, interleave: bool = False) -> np.ndarray:
    """Reshape an ``H x W`` or ``H x W x C`` image into a higher-order tensor.

    Pixel row ``i`` is written in mixed radix over ``row_factors``, most
    significant digit first, and likewise for columns. Modes come out as row
    digits, column digits, then the channel (3-d input only). With
    ``interleave`` the digit modes are ordered r1, c1, r2, c2, ...
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim not in (2, 3):
        raise ValueError(f"image must be H x W or H x W x C, got shape {pixels.shape}")
    h, w = pixels.shape[:2]
    if math.prod(row_factors) != h or math.prod(col_factors) != w:
        raise ValueError(
            f"factors {tuple(row_factors)} x {tuple(col_factors)} do not multiply to {h} x {w}"
        )
    t = pixels.reshape(tuple(row_factors) + tuple(col_factors) + pixels.shape[2:])
    if interleave:
        axes = _interleave_axes(len(row_factors), len(col_factors))
        t = t.transpose(axes + list(range(len(axes), t.ndim)))
    return np.ascontiguousarray(t)


def detensorize(t, row_factors, col_factors, interleave: bool = False) -> np.ndarray:
    """Inverse of :func:`tensorize_image`."""
    t = np.asarray(t, dtype=np.float64)
    n = len(row_factors) + len(col_factors)
    if interleave:
        axes = _interleave_axes(len(row_factors), len(col_factors))
        t = t.transpose(list(np.argsort(axes)) + list(range(n, t.ndim)))
    return t.reshape((math.prod(row_factors), math.prod(col_factors)) + t.shape[n:])


# observation masks

def sample_mask(dims, fraction: float, rng_seed=None) -> np.ndarray:
    """``ceil(fraction * N)`` distinct multi-indices, uniformly at random.

    Rows are sorted in row-major order of the flat index.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    dims = tuple(int(d) for d in dims)
    total = math.prod(dims)
    # round before ceil so 0.1 * 1_080_000 is not pushed up by float error
    n = math.ceil(round(fraction * total, 9))
    flat = np.sort(np.random.default_rng(rng_seed).choice(total, size=n, replace=False))
    return np.stack(np.unravel_index(flat, dims), axis=1).astype(np.int64)


def observe(tensor, indices) -> ObservationSet:
    tensor = np.asarray(tensor, dtype=np.float64)
    indices = np.asarray(indices, dtype=np.int64)
    return ObservationSet(indices, tensor[tuple(indices.T)], tensor.shape)


def split_observations(tensor, fraction: float, rng_seed=None):
    """Observed entries and the complementary held-out entries (None if empty)."""
    tensor = np.asarray(tensor, dtype=np.float64)
    idx = sample_mask(tensor.shape, fraction, rng_seed)
    mask = np.zeros(tensor.shape, dtype=bool)
    mask[tuple(idx.T)] = True
    train = observe(tensor, idx)
    rest = np.argwhere(~mask)
    return train, (observe(tensor, rest) if len(rest) else None)


# reports

def greedy_config_to_dict(config: GreedyConfig) -> dict:
    d = asdict(config)
    if d["edge_whitelist"] is not None:
        d["edge_whitelist"] = [list(e) for e in d["edge_whitelist"]]
    return d


def greedy_config_from_dict(d: dict) -> GreedyConfig:
    d = dict(d)
    d["slice_policy"] = SliceInitPolicy(**d["slice_policy"])
    d["als"] = AlsConfig(**d["als"])
    if d.get("edge_whitelist") is not None:
        d["edge_whitelist"] = tuple(tuple(e) for e in d["edge_whitelist"])
    return GreedyConfig(**d)


@dataclass
class ExperimentReport:
    """Config echo, per-iteration rows, final structure and status."""

    command: str
    config: dict = field(default_factory=dict)
    rows: list[dict] = field(default_factory=list)
    structure: dict = field(default_factory=dict)
    status: str = "ok"

    @classmethod
    def from_search(cls, command, config, trace: SearchTrace, net: TensorNetwork):
        rows = [
            {
                "iteration": r.iteration,
                "edge": list(r.edge) if r.edge else None,
                "loss": r.loss,
                "rel_error": r.rel_error,
                "test_error": r.test_error,
                "params": r.params,
                "wall_time": r.wall_time,
                "splits": len(r.splits),
            }
            for r in trace.records
        ]
        return cls(command, config, rows, structure_of(net), trace.status)

    def to_text(self) -> str:
        lines = [REPORT_HEADER, "command\t" + json.dumps(self.command)]
        lines.append("config\t" + json.dumps(self.config, sort_keys=True))
        lines.extend("row\t" + json.dumps(r, sort_keys=True) for r in self.rows)
        lines.append("structure\t" + json.dumps(self.structure, sort_keys=True))
        lines.append("status\t" + json.dumps(self.status))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentReport":
        lines = text.splitlines()
        if not lines or lines[0] != REPORT_HEADER:
            raise ValueError(f"not a report: first line must be {REPORT_HEADER!r}")
        out = cls(command="")
        for n, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            key, sep, payload = line.partition("\t")
            if not sep:
                raise ValueError(f"line {n}: expected key<TAB>json")
            try:
                value = json.loads(payload)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {n}: bad json: {exc}") from None
            if key == "row":
                out.rows.append(value)
            elif key in ("command", "config", "structure", "status"):
                setattr(out, key, value)
            else:
                raise ValueError(f"line {n}: unknown record {key!r}")
        return out

    def write(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def read(cls, path) -> "ExperimentReport":
        return cls.from_text(Path(path).read_text())


def structure_of(net: TensorNetwork) -> dict:
    return {
        "dims": list(net.dims),
        "edges": [list(e) for e in edge_list(net)],
        "params": param_count(net),
    }
