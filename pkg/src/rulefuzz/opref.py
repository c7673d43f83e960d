"""Built-in reference operator library and its two executors.

Every operator carries a ground-truth constraint checker, a ground-truth
shape function, and an element-level kernel; the eager interpreter runs
kernels in program order, the "optimizing" evaluator additionally performs
semantics-preserving rewrites (identity folding, reversed float accumulation)
and applies seeded bug corruptions from a BugPlan.

Failure taxonomy: ValidityFailure (arguments rejected, test-case is invalid),
NotImplementedFailure (incompatibility, not a bug), InternalFault (a genuine
backend defect, the fuzzing target).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .trace import DType, TensorType, RawInvocation

FLOAT_DTYPES = (DType.f32, DType.f64)
NUMERIC_DTYPES = (DType.f32, DType.f64, DType.i32, DType.i64)
ALL_DTYPES = tuple(DType)


class ValidityFailure(Exception):
    pass


class NotImplementedFailure(Exception):
    pass


class InternalFault(Exception):
    pass


@dataclass
class Tensor:
    dtype: DType
    data: np.ndarray

    def __post_init__(self):
        if self.data.dtype != self.dtype.np:
            self.data = self.data.astype(self.dtype.np)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    def type(self) -> TensorType:
        return TensorType(self.dtype, self.shape)

    def copy(self) -> "Tensor":
        return Tensor(self.dtype, self.data.copy())


def tensor_of(tt: TensorType, rng: np.random.Generator,
              lo: float = -5.0, hi: float = 5.0) -> Tensor:
    if tt.dtype.is_float:
        data = rng.uniform(lo, hi, size=tt.shape).astype(tt.dtype.np)
    elif tt.dtype is DType.bool:
        data = rng.integers(0, 2, size=tt.shape).astype(np.bool_)
    else:
        data = rng.integers(int(lo), int(hi) + 1, size=tt.shape).astype(tt.dtype.np)
    return Tensor(tt.dtype, data)


@dataclass(frozen=True)
class AttrSpec:
    name: str
    kind: str                 # "int" | "ints" | "float" | "bool" | "str"
    default: object = None
    list_len: int = 0         # for ints


@dataclass
class RefOperator:
    """One reference operator: signature template, ground truth, kernel."""

    name: str
    arity: int
    rank_variants: tuple[tuple[int, ...], ...]
    dtypes: tuple[DType, ...]
    attrs: tuple[AttrSpec, ...]
    check: object            # fn(shapes, attrs) -> None, raises ValidityFailure
    shape_fn: object         # fn(shapes, attrs) -> [shape]
    kernel: object           # fn(inputs: [Tensor], attrs) -> [Tensor]
    sample: object           # fn(rng) -> (shapes, attrs) valid draw
    rule_exprs: object = None  # fn(ranks) -> (shape dim expr strings, [(kind, expr)])
    in_place: bool = False
    hostile: str | None = None
    out_dtype: object = None  # fn(in_dtypes, attrs) -> [DType]; default: first input

    def normalize_attrs(self, attrs: dict) -> list[tuple[str, object]]:
        """Fill defaults, order per schema; reject unknown names."""
        unknown = set(attrs) - {a.name for a in self.attrs}
        if unknown:
            raise ValidityFailure(f"{self.name}: unknown attrs {sorted(unknown)}")
        out = []
        for spec in self.attrs:
            v = attrs.get(spec.name, spec.default)
            if v is None:
                raise ValidityFailure(f"{self.name}: missing attr {spec.name}")
            if spec.kind == "ints":
                v = tuple(int(x) for x in v)
            out.append((spec.name, v))
        return out

    def output_dtypes(self, in_dtypes, attrs, n_outputs: int = 1) -> list[DType]:
        if self.out_dtype is not None:
            return self.out_dtype(in_dtypes, attrs)
        return [in_dtypes[0]] * n_outputs


def _same_shape_check(op_name):
    def check(shapes, attrs):
        if len(set(shapes)) > 1:
            raise ValidityFailure(f"{op_name}: shape mismatch {shapes}")
    return check


def _no_check(shapes, attrs):
    return None


def _ident_shape(shapes, attrs):
    return [shapes[0]]


def _sample_dims(rng, rank, lo=1, hi=6):
    return tuple(int(rng.integers(lo, hi + 1)) for _ in range(rank))


def _ew_rule(ranks, binary: bool):
    r = ranks[0]
    shape = [f"i0_{d}" for d in range(r)]
    cons = []
    if binary:
        cons = [("eq", f"(- i0_{d} i1_{d})") for d in range(r)]
    return ([shape], cons)


def _f64sum(x: np.ndarray, reverse: bool = False) -> np.float64:
    # both executors accumulate in f64; the optimizing one reverses the order
    flat = x.reshape(-1).astype(np.float64)
    if reverse:
        flat = flat[::-1]
    return np.add.reduce(flat) if flat.size else np.float64(0.0)


def build_catalog() -> list[RefOperator]:
    """Deterministic catalog of reference operators (>= 20, incl. hostile)."""
    ops: list[RefOperator] = []

    # elementwise binary, same-shape
    def ew_binary(name, fn):
        def kernel(inputs, attrs):
            x, y = inputs
            return [Tensor(x.dtype, fn(x.data, y.data))]

        def sample(rng):
            rank = int(rng.integers(1, 4))
            dims = _sample_dims(rng, rank)
            return ([dims, dims], {})

        ops.append(RefOperator(
            name=name, arity=2,
            rank_variants=tuple((r, r) for r in range(5)),
            dtypes=NUMERIC_DTYPES,
            attrs=(),
            check=_same_shape_check(name),
            shape_fn=_ident_shape,
            kernel=kernel,
            sample=sample,
            rule_exprs=lambda ranks, rd: _ew_rule(ranks, binary=True),
        ))

    ew_binary("add", np.add)
    ew_binary("sub", np.subtract)
    ew_binary("mul", np.multiply)
    ew_binary("max2", np.maximum)

    # elementwise unary
    def ew_unary(name, fn, in_place=False):
        def kernel(inputs, attrs):
            (x,) = inputs
            if in_place:
                fn(x.data, out=x.data)
                return [x]
            return [Tensor(x.dtype, fn(x.data))]

        def sample(rng):
            rank = int(rng.integers(1, 4))
            return ([_sample_dims(rng, rank)], {})

        ops.append(RefOperator(
            name=name, arity=1,
            rank_variants=tuple((r,) for r in range(5)),
            dtypes=NUMERIC_DTYPES,
            attrs=(),
            check=_no_check,
            shape_fn=_ident_shape,
            kernel=kernel,
            sample=sample,
            rule_exprs=lambda ranks, rd: _ew_rule(ranks, binary=False),
            in_place=in_place,
        ))

    def _relu(x, out=None):
        return np.maximum(x, np.zeros((), dtype=x.dtype), out=out)

    ew_unary("relu", _relu)
    ew_unary("abs", np.abs)
    ew_unary("neg", np.negative)
    ew_unary("abs_", np.abs, in_place=True)

    # scale: float attr is rule-orthogonal
    def scale_kernel(inputs, attrs):
        (x,) = inputs
        return [Tensor(x.dtype, (x.data.astype(np.float64) * attrs["factor"]).astype(x.dtype.np))]

    ops.append(RefOperator(
        name="scale", arity=1,
        rank_variants=tuple((r,) for r in range(5)),
        dtypes=FLOAT_DTYPES,
        attrs=(AttrSpec("factor", "float", 1.0),),
        check=_no_check,
        shape_fn=_ident_shape,
        kernel=scale_kernel,
        sample=lambda rng: ([_sample_dims(rng, int(rng.integers(1, 4)))],
                            {"factor": round(float(rng.uniform(0.25, 3.0)), 3)}),
        rule_exprs=lambda ranks, rd: _ew_rule(ranks, binary=False),
    ))

    # sqrt: value-dependent validity (rejects negatives) -> filtered upstream
    def sqrt_kernel(inputs, attrs):
        (x,) = inputs
        if (x.data < 0).any():
            raise ValidityFailure("sqrt: negative input")
        return [Tensor(x.dtype, np.sqrt(x.data))]

    ops.append(RefOperator(
        name="sqrt", arity=1,
        rank_variants=tuple((r,) for r in range(5)),
        dtypes=FLOAT_DTYPES,
        attrs=(),
        check=_no_check,
        shape_fn=_ident_shape,
        kernel=sqrt_kernel,
        sample=lambda rng: ([_sample_dims(rng, int(rng.integers(1, 4)))], {}),
        hostile="value_validity",
    ))

    # sum over all dims -> scalar
    def sum_kernel(inputs, attrs):
        (x,) = inputs
        if x.dtype.is_float:
            return [Tensor(x.dtype, np.asarray(_f64sum(x.data)))]
        return [Tensor(x.dtype, np.asarray(x.data.sum(dtype=np.int64)))]

    ops.append(RefOperator(
        name="sum_all", arity=1,
        rank_variants=tuple((r,) for r in range(1, 5)),
        dtypes=NUMERIC_DTYPES,
        attrs=(),
        check=_no_check,
        shape_fn=lambda shapes, attrs: [()],
        kernel=sum_kernel,
        sample=lambda rng: ([_sample_dims(rng, int(rng.integers(1, 4)))], {}),
        rule_exprs=lambda ranks, rd: ([[]], []),
    ))

    # flatten
    def flatten_rule(ranks, rd):
        r = ranks[0]
        e = "i0_0"
        for d in range(1, r):
            e = f"(* {e} i0_{d})"
        return ([[e]], [])

    ops.append(RefOperator(
        name="flatten", arity=1,
        rank_variants=tuple((r,) for r in range(1, 5)),
        dtypes=ALL_DTYPES,
        attrs=(),
        check=_no_check,
        shape_fn=lambda shapes, attrs: [(int(np.prod(shapes[0], dtype=np.int64)),)],
        kernel=lambda inputs, attrs: [Tensor(inputs[0].dtype, inputs[0].data.reshape(-1))],
        sample=lambda rng: ([_sample_dims(rng, int(rng.integers(2, 5)))], {}),
        rule_exprs=flatten_rule,
    ))

    # transpose2d
    ops.append(RefOperator(
        name="transpose2d", arity=1,
        rank_variants=((2,),),
        dtypes=ALL_DTYPES,
        attrs=(),
        check=_no_check,
        shape_fn=lambda shapes, attrs: [(shapes[0][1], shapes[0][0])],
        kernel=lambda inputs, attrs: [Tensor(inputs[0].dtype, inputs[0].data.T.copy())],
        sample=lambda rng: ([_sample_dims(rng, 2)], {}),
        rule_exprs=lambda ranks, rd: ([["i0_1", "i0_0"]], []),
    ))

    # matmul
    def matmul_check(shapes, attrs):
        if shapes[0][1] != shapes[1][0]:
            raise ValidityFailure(f"matmul: inner dims {shapes}")

    def matmul_kernel(inputs, attrs):
        x, y = inputs
        if x.dtype.is_float:
            out = (x.data.astype(np.float64) @ y.data.astype(np.float64))
            return [Tensor(x.dtype, out.astype(x.dtype.np))]
        return [Tensor(x.dtype, x.data.astype(np.int64) @ y.data.astype(np.int64))]

    def matmul_sample(rng):
        m, k, n = _sample_dims(rng, 3)
        return ([(m, k), (k, n)], {})

    ops.append(RefOperator(
        name="matmul", arity=2,
        rank_variants=((2, 2),),
        dtypes=(DType.f32, DType.f64),
        attrs=(),
        check=matmul_check,
        shape_fn=lambda shapes, attrs: [(shapes[0][0], shapes[1][1])],
        kernel=matmul_kernel,
        sample=matmul_sample,
        rule_exprs=lambda ranks, rd: ([["i0_0", "i1_1"]], [("eq", "(- i0_1 i1_0)")]),
    ))

    # avg_pool2d with floor/ceil variants (ceil: one extra overhang window)
    def pool_dims(shape):
        # trailing two dims are pooled; leading dims pass through
        return shape[:-2], shape[-2], shape[-1]

    def pool_check(shapes, attrs):
        lead, h, w = pool_dims(shapes[0])
        kh, kw, pad, stride = attrs["kh"], attrs["kw"], attrs["pad"], attrs["stride"]
        if kh < 1 or kw < 1:
            raise ValidityFailure("avg_pool2d: kernel must be positive")
        if stride < 1:
            raise ValidityFailure("avg_pool2d: stride must be positive")
        if pad < 0:
            raise ValidityFailure("avg_pool2d: negative padding")
        if kh > h + 2 * pad or kw > w + 2 * pad:
            raise ValidityFailure("avg_pool2d: kernel exceeds padded input")

    def pool_shape(shapes, attrs):
        lead, h, w = pool_dims(shapes[0])
        kh, kw, pad, stride = attrs["kh"], attrs["kw"], attrs["pad"], attrs["stride"]
        extra = 2 if attrs["ceil"] else 1
        oh = (h + 2 * pad - kh) // stride + extra
        ow = (w + 2 * pad - kw) // stride + extra
        return [(*lead, oh, ow)]

    def pool_kernel_ordered(reverse):
        def kernel(inputs, attrs):
            (x,) = inputs
            kh, kw, pad, stride = attrs["kh"], attrs["kw"], attrs["pad"], attrs["stride"]
            (oshape,) = pool_shape([x.shape], attrs)
            lead, h, w = pool_dims(x.shape)
            padded = np.pad(
                x.data.reshape(-1, h, w).astype(np.float64),
                ((0, 0), (pad, pad), (pad, pad)),
            )
            ph, pw = h + 2 * pad, w + 2 * pad
            oh, ow = oshape[-2], oshape[-1]
            out = np.zeros((padded.shape[0], oh, ow), dtype=np.float64)
            for a in range(oh):
                for b in range(ow):
                    y0, x0 = a * stride, b * stride
                    y1, x1 = min(y0 + kh, ph), min(x0 + kw, pw)
                    win = padded[:, y0:y1, x0:x1]
                    if win.size == 0:
                        continue
                    flat = win.reshape(win.shape[0], -1)
                    if reverse:
                        flat = flat[:, ::-1]
                    out[:, a, b] = flat.sum(axis=1) / flat.shape[1]
            return [Tensor(x.dtype, out.reshape(oshape).astype(x.dtype.np))]
        return kernel

    def pool_rule(ranks, rd):
        r = ranks[0]
        lead = [f"i0_{d}" for d in range(r - 2)]
        h, w = f"i0_{r - 2}", f"i0_{r - 1}"
        extra = 2 if rd.get("ceil") else 1

        def dim_expr(i, k):
            return f"(+ (// (+ (- {i} {k}) (* 2 pad)) stride) {extra})"

        cons = [
            ("lt", "kh"), ("lt", "kw"), ("lt", "stride"), ("lt", "(+ pad 1)"),
            ("lt", f"(+ (- (+ {h} (* 2 pad)) kh) 1)"),
            ("lt", f"(+ (- (+ {w} (* 2 pad)) kw) 1)"),
        ]
        return ([lead + [dim_expr(h, "kh"), dim_expr(w, "kw")]], cons)

    def pool_sample(rng):
        rank = int(rng.integers(3, 5))
        lead = _sample_dims(rng, rank - 2, 1, 4)
        h, w = int(rng.integers(2, 7)), int(rng.integers(2, 7))
        pad = int(rng.integers(0, 3))
        kh = int(rng.integers(1, h + 2 * pad + 1))
        kw = int(rng.integers(1, w + 2 * pad + 1))
        stride = int(rng.integers(1, 4))
        ceil = bool(rng.integers(0, 2))
        return ([(*lead, h, w)],
                {"kh": kh, "kw": kw, "pad": pad, "stride": stride, "ceil": ceil})

    ops.append(RefOperator(
        name="avg_pool2d", arity=1,
        rank_variants=((3,), (4,)),
        dtypes=FLOAT_DTYPES,
        attrs=(AttrSpec("kh", "int"), AttrSpec("kw", "int"),
               AttrSpec("pad", "int", 0), AttrSpec("stride", "int", 1),
               AttrSpec("ceil", "bool", False)),
        check=pool_check,
        shape_fn=pool_shape,
        kernel=pool_kernel_ordered(reverse=False),
        sample=pool_sample,
        rule_exprs=pool_rule,
    ))

    # pad2d: string-token mode is rule-dependent but shares rules across modes
    def pad_check(shapes, attrs):
        if attrs["pad"] < 0:
            raise ValidityFailure("pad2d: negative padding")
        if attrs["mode"] not in ("zero", "edge"):
            raise ValidityFailure(f"pad2d: unknown mode {attrs['mode']}")

    def pad_kernel(inputs, attrs):
        (x,) = inputs
        p = attrs["pad"]
        mode = "constant" if attrs["mode"] == "zero" else "edge"
        if mode == "edge" and (x.shape[1] == 0 or x.shape[2] == 0) and p > 0:
            raise ValidityFailure("pad2d: edge mode needs non-empty dims")
        out = np.pad(x.data, ((0, 0), (p, p), (p, p)), mode=mode)
        return [Tensor(x.dtype, out)]

    ops.append(RefOperator(
        name="pad2d", arity=1,
        rank_variants=((3,),),
        dtypes=ALL_DTYPES,
        attrs=(AttrSpec("pad", "int"), AttrSpec("mode", "str", "zero")),
        check=pad_check,
        shape_fn=lambda shapes, attrs: [(shapes[0][0],
                                         shapes[0][1] + 2 * attrs["pad"],
                                         shapes[0][2] + 2 * attrs["pad"])],
        kernel=pad_kernel,
        sample=lambda rng: ([_sample_dims(rng, 3)],
                            {"pad": int(rng.integers(0, 4)),
                             "mode": ("zero", "edge")[int(rng.integers(0, 2))]}),
        rule_exprs=lambda ranks, rd: (
            [["i0_0", "(+ i0_1 (* 2 pad))", "(+ i0_2 (* 2 pad))"]],
            [("lt", "(+ pad 1)")],
        ),
    ))

    # slice_head: first `length` rows along dim 0
    def slice_check(shapes, attrs):
        if attrs["length"] < 1:
            raise ValidityFailure("slice_head: length must be positive")
        if attrs["length"] > shapes[0][0]:
            raise ValidityFailure("slice_head: length exceeds input")

    def slice_sample(rng):
        dims = _sample_dims(rng, int(rng.integers(1, 3)))
        return ([dims], {"length": int(rng.integers(1, dims[0] + 1))})

    ops.append(RefOperator(
        name="slice_head", arity=1,
        rank_variants=((1,), (2,)),
        dtypes=ALL_DTYPES,
        attrs=(AttrSpec("length", "int"),),
        check=slice_check,
        shape_fn=lambda shapes, attrs: [(attrs["length"], *shapes[0][1:])],
        kernel=lambda inputs, attrs: [Tensor(inputs[0].dtype,
                                             inputs[0].data[: attrs["length"]].copy())],
        sample=slice_sample,
        rule_exprs=lambda ranks, rd: (
            [["length"] + [f"i0_{d}" for d in range(1, ranks[0])]],
            [("lt", "length"), ("lt", "(+ (- i0_0 length) 1)")],
        ),
    ))

    # unfold1d: sliding windows over a vector
    def unfold_check(shapes, attrs):
        if attrs["size"] < 1 or attrs["step"] < 1:
            raise ValidityFailure("unfold1d: size/step must be positive")
        if attrs["size"] > shapes[0][0]:
            raise ValidityFailure("unfold1d: window exceeds input")

    def unfold_kernel(inputs, attrs):
        (x,) = inputs
        size, step = attrs["size"], attrs["step"]
        n = (x.shape[0] - size) // step + 1
        out = np.stack([x.data[i * step: i * step + size] for i in range(n)]) \
            if n else np.empty((0, size), dtype=x.dtype.np)
        return [Tensor(x.dtype, out)]

    def unfold_sample(rng):
        n = int(rng.integers(2, 9))
        return ([(n,)], {"size": int(rng.integers(1, n + 1)),
                         "step": int(rng.integers(1, 4))})

    ops.append(RefOperator(
        name="unfold1d", arity=1,
        rank_variants=((1,),),
        dtypes=ALL_DTYPES,
        attrs=(AttrSpec("size", "int"), AttrSpec("step", "int", 1)),
        check=unfold_check,
        shape_fn=lambda shapes, attrs: [
            ((shapes[0][0] - attrs["size"]) // attrs["step"] + 1, attrs["size"])],
        kernel=unfold_kernel,
        sample=unfold_sample,
        rule_exprs=lambda ranks, rd: (
            [["(+ (// (- i0_0 size) step) 1)", "size"]],
            [("lt", "size"), ("lt", "step"), ("lt", "(+ (- i0_0 size) 1)")],
        ),
    ))

    # concat2 along dim 0
    def concat_check(shapes, attrs):
        if shapes[0][1:] != shapes[1][1:]:
            raise ValidityFailure(f"concat2: trailing dims differ {shapes}")

    def concat_rule(ranks, rd):
        r = ranks[0]
        dims = ["(+ i0_0 i1_0)"] + [f"i0_{d}" for d in range(1, r)]
        cons = [("eq", f"(- i0_{d} i1_{d})") for d in range(1, r)]
        return ([dims], cons)

    def concat_sample(rng):
        rank = int(rng.integers(1, 3))
        dims = _sample_dims(rng, rank)
        other = (int(rng.integers(1, 7)), *dims[1:])
        return ([dims, other], {})

    ops.append(RefOperator(
        name="concat2", arity=2,
        rank_variants=((1, 1), (2, 2)),
        dtypes=ALL_DTYPES,
        attrs=(),
        check=concat_check,
        shape_fn=lambda shapes, attrs: [(shapes[0][0] + shapes[1][0], *shapes[0][1:])],
        kernel=lambda inputs, attrs: [Tensor(inputs[0].dtype,
                                             np.concatenate([inputs[0].data, inputs[1].data]))],
        sample=concat_sample,
        rule_exprs=concat_rule,
    ))

    # split2 along dim 0 into two halves
    def split_check(shapes, attrs):
        if shapes[0][0] % 2 != 0:
            raise ValidityFailure("split2: leading dim must be even")

    def split_rule(ranks, rd):
        r = ranks[0]
        half = ["(// i0_0 2)"] + [f"i0_{d}" for d in range(1, r)]
        return ([half, list(half)], [("eq", "(mod i0_0 2)")])

    ops.append(RefOperator(
        name="split2", arity=1,
        rank_variants=((1,), (2,)),
        dtypes=ALL_DTYPES,
        attrs=(),
        check=split_check,
        shape_fn=lambda shapes, attrs: [
            (shapes[0][0] // 2, *shapes[0][1:]),
            (shapes[0][0] // 2, *shapes[0][1:])],
        kernel=lambda inputs, attrs: [
            Tensor(inputs[0].dtype, inputs[0].data[: inputs[0].shape[0] // 2].copy()),
            Tensor(inputs[0].dtype, inputs[0].data[inputs[0].shape[0] // 2:].copy())],
        sample=lambda rng: ([(2 * int(rng.integers(1, 5)),
                              *_sample_dims(rng, int(rng.integers(0, 2))))], {}),
        rule_exprs=split_rule,
    ))

    # reshape2: reshape to a given 2-d shape (int-list attr)
    def reshape_check(shapes, attrs):
        d0, d1 = attrs["dims"]
        if d0 < 1 or d1 < 1:
            raise ValidityFailure("reshape2: target dims must be positive")
        if int(np.prod(shapes[0], dtype=np.int64)) != d0 * d1:
            raise ValidityFailure("reshape2: element count mismatch")

    def reshape_rule(ranks, rd):
        r = ranks[0]
        prod = "i0_0"
        for d in range(1, r):
            prod = f"(* {prod} i0_{d})"
        return ([["dims_0", "dims_1"]],
                [("lt", "dims_0"), ("lt", "dims_1"),
                 ("eq", f"(- {prod} (* dims_0 dims_1))")])

    def reshape_sample(rng):
        d0, d1 = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        if rng.integers(0, 2):
            return ([(d0 * d1,)], {"dims": [d0, d1]})
        return ([(d0, d1)], {"dims": [d1, d0]} if rng.integers(0, 2) else {"dims": [d0, d1]})

    ops.append(RefOperator(
        name="reshape2", arity=1,
        rank_variants=((1,), (2,)),
        dtypes=ALL_DTYPES,
        attrs=(AttrSpec("dims", "ints", list_len=2),),
        check=reshape_check,
        shape_fn=lambda shapes, attrs: [tuple(attrs["dims"])],
        kernel=lambda inputs, attrs: [Tensor(inputs[0].dtype,
                                             inputs[0].data.reshape(tuple(attrs["dims"])))],
        sample=reshape_sample,
        rule_exprs=reshape_rule,
    ))

    # hostile: output shape depends on a call counter (nondeterministic)
    state = {"calls": 0}

    def rand_shape_kernel(inputs, attrs):
        state["calls"] += 1
        n = state["calls"] % 7 + 1
        return [Tensor(inputs[0].dtype, np.zeros(n, dtype=inputs[0].dtype.np))]

    ops.append(RefOperator(
        name="rand_shape", arity=1,
        rank_variants=((1,),),
        dtypes=FLOAT_DTYPES,
        attrs=(),
        check=_no_check,
        shape_fn=lambda shapes, attrs: [shapes[0]],  # nominal only
        kernel=rand_shape_kernel,
        sample=lambda rng: ([_sample_dims(rng, 1)], {}),
        hostile="nondeterministic",
    ))

    # hostile: output length equals the count of positive elements
    ops.append(RefOperator(
        name="count_pos", arity=1,
        rank_variants=((1,),),
        dtypes=NUMERIC_DTYPES,
        attrs=(),
        check=_no_check,
        shape_fn=lambda shapes, attrs: [shapes[0]],  # nominal only
        kernel=lambda inputs, attrs: [Tensor(
            inputs[0].dtype,
            inputs[0].data[inputs[0].data > 0].copy())],
        sample=lambda rng: ([_sample_dims(rng, 1)], {}),
        hostile="value_dependent",
    ))

    # hostile: fails on every second call
    flaky = {"calls": 0}

    def flaky_kernel(inputs, attrs):
        flaky["calls"] += 1
        if flaky["calls"] % 2 == 0:
            raise InternalFault("flaky_once: scheduled failure")
        return [Tensor(inputs[0].dtype, inputs[0].data.copy())]

    ops.append(RefOperator(
        name="flaky_once", arity=1,
        rank_variants=((1,),),
        dtypes=FLOAT_DTYPES,
        attrs=(),
        check=_no_check,
        shape_fn=_ident_shape,
        kernel=flaky_kernel,
        sample=lambda rng: ([_sample_dims(rng, 1)], {}),
        hostile="flaky",
    ))

    return ops


def library_catalog() -> list[RefOperator]:
    return build_catalog()


class RefExecutor:
    """Eager interpreter over the reference catalog. Reentrant and stateless
    across calls except the deliberately hostile counter-based operators."""

    reentrant = True

    def __init__(self, catalog: list[RefOperator] | None = None):
        self.catalog = catalog if catalog is not None else build_catalog()
        self.by_name = {op.name: op for op in self.catalog}

    def operator(self, api: str) -> RefOperator:
        op = self.by_name.get(api)
        if op is None:
            raise NotImplementedFailure(f"unknown operator {api!r}")
        return op

    def invoke(self, api: str, inputs: list[Tensor], attrs: dict) -> list[Tensor]:
        op = self.operator(api)
        if len(inputs) != op.arity:
            raise ValidityFailure(f"{api}: arity {len(inputs)} != {op.arity}")
        ranks = tuple(len(t.shape) for t in inputs)
        if ranks not in op.rank_variants:
            raise ValidityFailure(f"{api}: unsupported ranks {ranks}")
        dtypes = [t.dtype for t in inputs]
        if any(dt not in op.dtypes for dt in dtypes):
            raise ValidityFailure(f"{api}: unsupported dtypes {dtypes}")
        if op.arity == 2 and dtypes[0] != dtypes[1]:
            raise ValidityFailure(f"{api}: mixed dtypes {dtypes}")
        norm = dict(op.normalize_attrs(attrs))
        shapes = [t.shape for t in inputs]
        op.check(shapes, norm)
        outs = op.kernel(inputs, norm)
        if op.hostile is None:
            expect = op.shape_fn(shapes, norm)
            if [o.shape for o in outs] != [tuple(s) for s in expect]:
                raise InternalFault(
                    f"{api}: kernel shape {[o.shape for o in outs]} != ground truth {expect}")
        return outs

    def sample_raw(self, op: RefOperator, rng: np.random.Generator,
                   dtype: DType | None = None) -> RawInvocation:
        """Draw one invocation (as developer tests would) and execute it."""
        shapes, attrs = op.sample(rng)
        pool = [dt for dt in op.dtypes]
        dt = dtype if dtype is not None else pool[int(rng.integers(0, len(pool)))]
        inputs = [tensor_of(TensorType(dt, tuple(s)), rng) for s in shapes]
        norm = op.normalize_attrs(attrs)
        try:
            outs = self.invoke(op.name, inputs, dict(norm))
            return RawInvocation(op.name, inputs, norm, outs, True)
        except (ValidityFailure, NotImplementedFailure, InternalFault):
            return RawInvocation(op.name, inputs, norm, [], False)

    def run_record(self, record, seed: int = 0):
        """Execute a payload-free record: fresh payloads, classified result.

        Returns (valid: bool, outputs: [TensorType]); InternalFault and
        unknown failures propagate as discard-worthy exceptions.
        """
        rng = np.random.default_rng(seed)
        inputs = [tensor_of(tt, rng) for tt in record.inputs]
        attrs = {n: av.plain() for n, av in record.attrs}
        try:
            outs = self.invoke(record.api, inputs, attrs)
        except ValidityFailure:
            return False, []
        return True, [o.type() for o in outs]
