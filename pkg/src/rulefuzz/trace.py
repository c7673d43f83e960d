"""Invocation records: data model, validation filters, and the record file format.

A record is one simplified operator invocation: input tensor types, attribute
values, other args, output tensor types, and a validity flag. Tensor payloads
are never stored. The newline-delimited JSON record file written here is the
contract shared with the external capture shim (field names are fixed:
``api, inputs, attrs, outputs, valid``).
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

MAX_EXTENT = 2**31 - 1

DETERMINISM_REPLAYS = 3
VALUE_INDEPENDENCE_TRIALS = 3
VALUE_INDEPENDENCE_RANGE = 10**6


class DType(enum.Enum):
    f32 = "f32"
    f64 = "f64"
    i32 = "i32"
    i64 = "i64"
    bool = "bool"

    @property
    def np(self):
        return _NP_DTYPES[self]

    @property
    def is_float(self) -> bool:
        return self in (DType.f32, DType.f64)

    @property
    def kind(self) -> str:
        """Coarse dtype class used for partial-operator keying."""
        if self.is_float:
            return "float"
        return "bool" if self is DType.bool else "int"


_NP_DTYPES = {
    DType.f32: np.float32,
    DType.f64: np.float64,
    DType.i32: np.int32,
    DType.i64: np.int64,
    DType.bool: np.bool_,
}


@dataclass(frozen=True)
class TensorType:
    dtype: DType
    shape: tuple[int, ...]

    def __post_init__(self):
        if any(d < 0 for d in self.shape):
            raise ValueError(f"negative extent in shape {self.shape}")

    @property
    def rank(self) -> int:
        return len(self.shape)

    @property
    def numel(self) -> int:
        n = 1
        for d in self.shape:
            n *= d
        return n

    def __str__(self) -> str:
        return f"{self.dtype.value}[{','.join(str(d) for d in self.shape)}]"


# Attribute tag names. JSON value types map onto these one-to-one, which keeps
# the on-disk format free of explicit tags.
ATTR_INT = "int"          # symbolic integer
ATTR_INTS = "ints"        # int list, flattened to scalars for rule inference
ATTR_FLOAT = "float"      # rule-orthogonal
ATTR_BOOL = "bool"        # rule-dependent categorical
ATTR_STR = "str"          # rule-dependent categorical (e.g. layout token)


@dataclass(frozen=True)
class AttrValue:
    kind: str
    value: object

    @staticmethod
    def of(value) -> "AttrValue":
        """Classify a plain Python value. Raises TypeError when unsupported."""
        if isinstance(value, AttrValue):
            return value
        if isinstance(value, bool):
            return AttrValue(ATTR_BOOL, value)
        if isinstance(value, (int, np.integer)):
            return AttrValue(ATTR_INT, int(value))
        if isinstance(value, (float, np.floating)):
            return AttrValue(ATTR_FLOAT, float(value))
        if isinstance(value, str):
            return AttrValue(ATTR_STR, value)
        if isinstance(value, (list, tuple)) and all(
            isinstance(v, (int, np.integer)) and not isinstance(v, bool) for v in value
        ):
            return AttrValue(ATTR_INTS, tuple(int(v) for v in value))
        raise TypeError(f"unsupported attribute value: {value!r}")

    def plain(self):
        if self.kind == ATTR_INTS:
            return list(self.value)
        return self.value


@dataclass(frozen=True)
class Record:
    api: str
    inputs: tuple[TensorType, ...]
    attrs: tuple[tuple[str, AttrValue], ...]  # ordered, names unique
    outputs: tuple[TensorType, ...]           # empty when invalid
    valid: bool

    def __post_init__(self):
        names = [n for n, _ in self.attrs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate attribute names: {names}")
        if self.valid and not self.outputs and self.api != "":
            # valid=true implies outputs non-empty (zero-output ops are not modeled)
            raise ValueError("valid record with no outputs")

    @property
    def attr_map(self) -> dict[str, AttrValue]:
        return dict(self.attrs)

    def identity(self) -> tuple:
        """(inputs, attrs) tuple used for mutation dedup."""
        return (self.inputs, self.attrs)


def make_record(api, inputs, attrs, outputs, valid) -> Record:
    return Record(
        api=api,
        inputs=tuple(inputs),
        attrs=tuple((n, AttrValue.of(v)) for n, v in attrs),
        outputs=tuple(outputs),
        valid=valid,
    )


@dataclass(frozen=True)
class SymbolEnv:
    """Ordered (name, value) symbols drawn from the input dims and attributes.

    Canonical order: input dims in tensor order first (``i{t}_{d}``), then
    symbolic attributes in declaration order. Int-list attributes contribute
    one symbol per element (``name_0, name_1, ...``).
    """

    symbols: tuple[tuple[str, int], ...]
    n_dims: int  # leading symbols that are shape dims (always >= 0)

    def __post_init__(self):
        names = [n for n, _ in self.symbols]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate symbol names: {names}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.symbols)

    @property
    def values(self) -> tuple[int, ...]:
        return tuple(v for _, v in self.symbols)

    def value_of(self, name: str) -> int:
        for n, v in self.symbols:
            if n == name:
                return v
        raise KeyError(name)


def symbol_env(record: Record) -> SymbolEnv:
    """Build the canonical SymbolEnv (A ∪ I) of a record."""
    syms: list[tuple[str, int]] = []
    for t, tt in enumerate(record.inputs):
        for d, extent in enumerate(tt.shape):
            syms.append((f"i{t}_{d}", extent))
    n_dims = len(syms)
    for name, av in record.attrs:
        if av.kind == ATTR_INT:
            syms.append((name, int(av.value)))
        elif av.kind == ATTR_INTS:
            for j, v in enumerate(av.value):
                syms.append((f"{name}_{j}", int(v)))
    return SymbolEnv(tuple(syms), n_dims)


def with_symbols(record: Record, values: dict[str, int]) -> Record:
    """Rebuild a record with some A ∪ I symbols replaced (outputs cleared).

    The result is unlabeled: callers execute it to restore outputs/valid.
    """
    inputs = []
    for t, tt in enumerate(record.inputs):
        shape = tuple(
            values.get(f"i{t}_{d}", extent) for d, extent in enumerate(tt.shape)
        )
        inputs.append(TensorType(tt.dtype, shape))
    attrs = []
    for name, av in record.attrs:
        if av.kind == ATTR_INT and name in values:
            attrs.append((name, AttrValue(ATTR_INT, values[name])))
        elif av.kind == ATTR_INTS:
            vals = tuple(
                values.get(f"{name}_{j}", v) for j, v in enumerate(av.value)
            )
            attrs.append((name, AttrValue(ATTR_INTS, vals)))
        else:
            attrs.append((name, av))
    return Record(record.api, tuple(inputs), tuple(attrs), (), False)


# --------------------------------------------------------------------------
# Raw invocations and simplification


@dataclass
class RawInvocation:
    """A full invocation as produced in-process: payloads still attached."""

    api: str
    inputs: list  # list of Tensor-like objects (duck-typed: .dtype/.shape or opref.Tensor)
    attrs: list[tuple[str, object]]
    outputs: list | None  # None or [] when the call failed
    valid: bool


class SkipReason(enum.Enum):
    unsupported_attr = "unsupported_attr"
    extent_overflow = "extent_overflow"
    nondeterministic = "nondeterministic"
    value_dependent = "value_dependent"


class RecordRejected(Exception):
    def __init__(self, reason: SkipReason, detail: str = ""):
        super().__init__(f"{reason.value}: {detail}")
        self.reason = reason


def _tensor_type_of(obj) -> TensorType:
    if isinstance(obj, TensorType):
        return obj
    dt = obj.dtype
    if not isinstance(dt, DType):
        dt = DType(str(dt))
    shape = tuple(int(d) for d in obj.shape)
    return TensorType(dt, shape)


def simplify(raw: RawInvocation) -> Record:
    """Drop tensor payloads, classify attributes, keep only tensor types.

    Idempotent on already-simplified content. Raises RecordRejected for
    unsupported argument types or out-of-bound extents.
    """
    try:
        inputs = tuple(_tensor_type_of(t) for t in raw.inputs)
        outputs = tuple(_tensor_type_of(t) for t in (raw.outputs or []))
    except (TypeError, AttributeError, ValueError) as e:
        raise RecordRejected(SkipReason.unsupported_attr, str(e))
    for tt in (*inputs, *outputs):
        if any(d > MAX_EXTENT for d in tt.shape):
            raise RecordRejected(SkipReason.extent_overflow, str(tt))
    attrs = []
    for name, value in raw.attrs:
        try:
            attrs.append((name, AttrValue.of(value)))
        except TypeError as e:
            raise RecordRejected(SkipReason.unsupported_attr, f"{name}: {e}")
    return Record(raw.api, inputs, tuple(attrs), outputs if raw.valid else (), raw.valid)


# --------------------------------------------------------------------------
# Trace filters (determinism, value independence)


def _fill(rng: np.random.Generator, tt: TensorType, lo: float, hi: float):
    from .opref import Tensor  # local import: opref depends on trace types

    if tt.dtype.is_float:
        data = rng.uniform(lo, hi, size=tt.shape).astype(tt.dtype.np)
    elif tt.dtype is DType.bool:
        data = rng.integers(0, 2, size=tt.shape).astype(np.bool_)
    else:
        data = rng.integers(int(lo), int(hi) + 1, size=tt.shape).astype(tt.dtype.np)
    return Tensor(tt.dtype, data)


def _payloads(record: Record, seed: int, lo: float, hi: float):
    rng = np.random.default_rng(seed)
    return [_fill(rng, tt, lo, hi) for tt in record.inputs]


def _record_seed(record: Record, salt: int) -> int:
    blob = (serialize_record(record) + f"#{salt}").encode()
    return int.from_bytes(hashlib.sha1(blob).digest()[:8], "little")


def check_determinism(api: str, record: Record, executor) -> bool:
    """Replay the record three times with identical inputs.

    True iff all replays succeed and produce bitwise-identical outputs.
    Executor failures count as nondeterministic/unusable, never as bugs.
    """
    r = VALUE_INDEPENDENCE_RANGE
    inputs = _payloads(record, _record_seed(record, 0), -r, r)
    baseline = None
    for _ in range(DETERMINISM_REPLAYS):
        try:
            outs = executor.invoke(api, [t.copy() for t in inputs], dict(
                (n, av.plain()) for n, av in record.attrs))
        except Exception:
            return False
        sig = [(o.type(), o.data.tobytes()) for o in outs]
        if baseline is None:
            baseline = sig
        elif sig != baseline:
            return False
    return True


def check_value_independence(api: str, record: Record, executor) -> bool:
    """Run three executions with fresh random input values (shapes fixed).

    True iff all succeed and yield identical output tensor types.
    """
    r = VALUE_INDEPENDENCE_RANGE
    types = None
    for k in range(VALUE_INDEPENDENCE_TRIALS):
        inputs = _payloads(record, _record_seed(record, k + 1), -r, r)
        try:
            outs = executor.invoke(api, inputs, dict(
                (n, av.plain()) for n, av in record.attrs))
        except Exception:
            return False
        sig = tuple(o.type() for o in outs)
        if types is None:
            types = sig
        elif sig != types:
            return False
    return True


# --------------------------------------------------------------------------
# Record file format (newline-delimited JSON, UTF-8)


def _tt_to_json(tt: TensorType) -> dict:
    return {"dtype": tt.dtype.value, "shape": list(tt.shape)}


def _tt_from_json(obj) -> TensorType:
    return TensorType(DType(obj["dtype"]), tuple(int(d) for d in obj["shape"]))


def record_to_json(record: Record) -> dict:
    attrs = {}
    for name, av in record.attrs:
        attrs[name] = av.plain()
    return {
        "api": record.api,
        "inputs": [_tt_to_json(t) for t in record.inputs],
        "attrs": attrs,
        "outputs": [_tt_to_json(t) for t in record.outputs],
        "valid": record.valid,
    }


def record_from_json(obj: dict) -> Record:
    attrs = tuple((n, AttrValue.of(v)) for n, v in obj["attrs"].items())
    inputs = tuple(_tt_from_json(t) for t in obj["inputs"])
    outputs = tuple(_tt_from_json(t) for t in obj["outputs"])
    for tt in (*inputs, *outputs):
        if any(d > MAX_EXTENT for d in tt.shape):
            raise RecordRejected(SkipReason.extent_overflow, str(tt))
    return Record(obj["api"], inputs, attrs, outputs, bool(obj["valid"]))


def serialize_record(record: Record) -> str:
    return json.dumps(record_to_json(record), separators=(", ", ": "))


def deserialize_record(line: str) -> Record:
    return record_from_json(json.loads(line))


def save_records(records: Iterable[Record], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(serialize_record(r) + "\n")


def load_records(path) -> list[Record]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(deserialize_record(line))
    return out
