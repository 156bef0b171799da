"""Minimal dense-tensor math with reverse-mode automatic differentiation.

Tensors are float64 numpy arrays of rank <= 2.  Operations executed inside a
``with record() as tape:`` block are appended to that tape in execution
order, which is already a topological order, so the backward pass is a
single reverse sweep.  Every forward op checks its result for non-finite
values and raises :class:`NumericError` on failure.
"""

from __future__ import annotations

import contextlib
import threading
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import NumericError, ShapeError, ValidationError

Array = np.ndarray

_ACTIVE = threading.local()


def _as_array(value) -> Array:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim > 2:
        raise ShapeError(f"rank {arr.ndim} tensors are not supported (max 2)")
    return arr


class Tensor:
    """A value in a recorded computation; leaves may be marked learnable."""

    __slots__ = ("value", "grad", "requires_grad", "tape", "_backward")

    def __init__(self, value, requires_grad: bool = False):
        self.value = _as_array(value)
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self.tape: "Tape | None" = None
        self._backward: Callable[[Array], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, grad: Array) -> None:
        if not self.requires_grad and self._backward is None:
            return  # plain constants get no gradient storage
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += grad

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Tape:
    """Append-only record of operations; backward walks it once in reverse."""

    def __init__(self):
        self._nodes: list[Tensor] = []
        self._spent = False

    def __len__(self) -> int:
        return len(self._nodes)

    def reset(self) -> None:
        self._nodes.clear()
        self._spent = False

    def backward(self, output: Tensor) -> None:
        """Accumulate d(output)/d(leaf) into every learnable leaf's ``grad``."""
        if self._spent:
            raise ValidationError("backward called twice on the same tape without reset")
        if output.shape != ():
            raise ShapeError(f"backward requires a scalar output, got shape {output.shape}")
        if output.tape is not self:
            raise ValidationError("output was not recorded on this tape")
        self._spent = True
        output._accumulate(np.ones_like(output.value))
        for node in reversed(self._nodes):
            if node.grad is None or node._backward is None:
                continue
            node._backward(node.grad)
            node.grad = None  # intermediate grads are transient


@contextlib.contextmanager
def record() -> Iterator[Tape]:
    """Make a fresh tape the recording target for ops run inside the block."""
    tape = Tape()
    previous = getattr(_ACTIVE, "tape", None)
    _ACTIVE.tape = tape
    try:
        yield tape
    finally:
        _ACTIVE.tape = previous


class ParamStore:
    """Named map of learnable tensors with matching gradient accumulators."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, value) -> Tensor:
        if name in self._params:
            raise ValidationError(f"parameter {name!r} already registered")
        tensor = Tensor(value, requires_grad=True)
        self._params[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._params.items())

    def zero_grad(self) -> None:
        for tensor in self._params.values():
            tensor.zero_grad()

    @property
    def n_values(self) -> int:
        return sum(t.value.size for t in self._params.values())


def _make(op: str, value: Array, parents: Sequence[Tensor],
          backward: Callable[[Array], None]) -> Tensor:
    if not np.all(np.isfinite(value)):
        raise NumericError(f"{op} produced a non-finite value")
    out = Tensor(value)
    out._backward = backward
    tape = getattr(_ACTIVE, "tape", None)
    if tape is None:
        # outside a recording block: still usable for forward evaluation
        tape = Tape()
        for p in parents:
            if p.tape is not None:
                tape = p.tape
                break
    out.tape = tape
    tape._nodes.append(out)
    return out


def constant(value) -> Tensor:
    return Tensor(value)


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("add", a, b)

    def backward(g: Array) -> None:
        a._accumulate(g)
        b._accumulate(g)

    return _make("add", a.value + b.value, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("sub", a, b)

    def backward(g: Array) -> None:
        a._accumulate(g)
        b._accumulate(-g)

    return _make("sub", a.value - b.value, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product."""
    _same_shape("mul", a, b)
    av, bv = a.value, b.value

    def backward(g: Array) -> None:
        a._accumulate(g * bv)
        b._accumulate(g * av)

    return _make("mul", av * bv, (a, b), backward)


def div(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise quotient; caller guarantees a nonzero denominator."""
    _same_shape("div", a, b)
    av, bv = a.value, b.value

    def backward(g: Array) -> None:
        a._accumulate(g / bv)
        b._accumulate(-g * av / (bv * bv))

    return _make("div", av / bv, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def backward(g: Array) -> None:
        a._accumulate(g * c)

    return _make("scale", a.value * c, (a,), backward)


def shift(a: Tensor, c: float) -> Tensor:
    """Add a constant to every element."""

    def backward(g: Array) -> None:
        a._accumulate(g)

    return _make("shift", a.value + float(c), (a,), backward)


def one_minus(a: Tensor) -> Tensor:
    def backward(g: Array) -> None:
        a._accumulate(-g)

    return _make("one_minus", 1.0 - a.value, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix/vector product for the rank combinations 2x2, 2x1 and 1x2."""
    av, bv = a.value, b.value
    if av.ndim == 0 or bv.ndim == 0:
        raise ShapeError(f"matmul: scalar operand (shapes {a.shape} and {b.shape})")
    if av.shape[-1] != bv.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} are incompatible")

    def backward(g: Array) -> None:
        if av.ndim == 2 and bv.ndim == 2:
            a._accumulate(g @ bv.T)
            b._accumulate(av.T @ g)
        elif av.ndim == 2 and bv.ndim == 1:
            a._accumulate(np.outer(g, bv))
            b._accumulate(av.T @ g)
        else:  # vector @ matrix
            a._accumulate(g @ bv.T)
            b._accumulate(np.outer(av, g))

    return _make("matmul", av @ bv, (a, b), backward)


def transpose(a: Tensor) -> Tensor:
    if a.value.ndim != 2:
        raise ShapeError(f"transpose: expected a matrix, got shape {a.shape}")

    def backward(g: Array) -> None:
        a._accumulate(g.T)

    return _make("transpose", a.value.T.copy(), (a,), backward)


def add_scalar(a: Tensor, s: Tensor) -> Tensor:
    """Add a scalar tensor to every element of a tensor."""
    if s.value.shape != ():
        raise ShapeError(f"add_scalar: expected a scalar, got shape {s.shape}")

    def backward(g: Array) -> None:
        a._accumulate(g)
        s._accumulate(np.asarray(g).sum())

    return _make("add_scalar", a.value + s.value, (a, s), backward)


def dot(a: Tensor, b: Tensor) -> Tensor:
    if a.value.ndim != 1 or b.value.ndim != 1:
        raise ShapeError(f"dot: expected vectors, got {a.shape} and {b.shape}")
    _same_shape("dot", a, b)
    av, bv = a.value, b.value

    def backward(g: Array) -> None:
        a._accumulate(g * bv)
        b._accumulate(g * av)

    return _make("dot", np.dot(av, bv), (a, b), backward)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """w @ x + b."""
    return add(matmul(w, x), b)


def concat(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate vectors into one vector."""
    if not parts:
        raise ShapeError("concat: no operands")
    for p in parts:
        if p.value.ndim != 1:
            raise ShapeError(f"concat: expected vectors, got shape {p.shape}")
    sizes = [p.value.size for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g: Array) -> None:
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            p._accumulate(g[lo:hi])

    return _make("concat", np.concatenate([p.value for p in parts]), tuple(parts), backward)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate matrices with equal row counts along columns."""
    if not parts:
        raise ShapeError("concat_cols: no operands")
    rows = parts[0].value.shape[0] if parts[0].value.ndim == 2 else -1
    for p in parts:
        if p.value.ndim != 2 or p.value.shape[0] != rows:
            raise ShapeError(f"concat_cols: incompatible shape {p.shape}")
    widths = [p.value.shape[1] for p in parts]
    offsets = np.cumsum([0] + widths)

    def backward(g: Array) -> None:
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            p._accumulate(g[:, lo:hi])

    return _make("concat_cols", np.concatenate([p.value for p in parts], axis=1),
                 tuple(parts), backward)


def stack_rows(parts: Sequence[Tensor]) -> Tensor:
    """Stack equal-length vectors into a matrix, one row each."""
    if not parts:
        raise ShapeError("stack_rows: no operands")
    width = parts[0].value.size
    for p in parts:
        if p.value.ndim != 1 or p.value.size != width:
            raise ShapeError(f"stack_rows: incompatible shape {p.shape}")

    def backward(g: Array) -> None:
        for i, p in enumerate(parts):
            p._accumulate(g[i])

    return _make("stack_rows", np.stack([p.value for p in parts]), tuple(parts), backward)


def row(a: Tensor, i: int) -> Tensor:
    if a.value.ndim != 2:
        raise ShapeError(f"row: expected a matrix, got shape {a.shape}")

    def backward(g: Array) -> None:
        full = np.zeros_like(a.value)
        full[i] = g
        a._accumulate(full)

    return _make("row", a.value[i].copy(), (a,), backward)


def take_rows(a: Tensor, indices: Sequence[int]) -> Tensor:
    """Gather rows by index (duplicates allowed); backward scatter-adds."""
    if a.value.ndim != 2:
        raise ShapeError(f"take_rows: expected a matrix, got shape {a.shape}")
    idx = np.asarray(indices, dtype=np.intp)

    def backward(g: Array) -> None:
        full = np.zeros_like(a.value)
        np.add.at(full, idx, g)
        a._accumulate(full)

    return _make("take_rows", a.value[idx].copy(), (a,), backward)


def tile_row(v: Tensor, n: int) -> Tensor:
    """Repeat a vector as n identical matrix rows."""
    if v.value.ndim != 1:
        raise ShapeError(f"tile_row: expected a vector, got shape {v.shape}")

    def backward(g: Array) -> None:
        v._accumulate(g.sum(axis=0))

    return _make("tile_row", np.tile(v.value, (n, 1)), (v,), backward)


def add_rowvec(a: Tensor, v: Tensor) -> Tensor:
    """Add a vector to every row of a matrix."""
    if a.value.ndim != 2 or v.value.ndim != 1 or a.value.shape[1] != v.value.size:
        raise ShapeError(f"add_rowvec: shapes {a.shape} and {v.shape} are incompatible")

    def backward(g: Array) -> None:
        a._accumulate(g)
        v._accumulate(g.sum(axis=0))

    return _make("add_rowvec", a.value + v.value, (a, v), backward)


def sigmoid(a: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-a.value))

    def backward(g: Array) -> None:
        a._accumulate(g * out * (1.0 - out))

    return _make("sigmoid", out, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.value)

    def backward(g: Array) -> None:
        a._accumulate(g * (1.0 - out * out))

    return _make("tanh", out, (a,), backward)


def log(a: Tensor) -> Tensor:
    """Elementwise natural log; non-positive input surfaces as NumericError."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.value)

    def backward(g: Array) -> None:
        a._accumulate(g / a.value)

    return _make("log", out, (a,), backward)


def sqrt(a: Tensor) -> Tensor:
    with np.errstate(invalid="ignore"):
        out = np.sqrt(a.value)

    def backward(g: Array) -> None:
        a._accumulate(g / (2.0 * out))

    return _make("sqrt", out, (a,), backward)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes through only where unclamped."""
    out = np.clip(a.value, lo, hi)
    inside = ((a.value > lo) & (a.value < hi)).astype(np.float64)

    def backward(g: Array) -> None:
        a._accumulate(g * inside)

    return _make("clip", out, (a,), backward)


def softmax(a: Tensor, axis: int | None = None) -> Tensor:
    """Numerically stable softmax along ``axis`` (the whole vector for rank 1)."""
    if a.value.ndim == 1:
        ax = 0
    elif axis is None:
        raise ShapeError("softmax: axis required for matrices")
    else:
        ax = axis
    shifted = a.value - a.value.max(axis=ax, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=ax, keepdims=True)

    def backward(g: Array) -> None:
        inner = (g * out).sum(axis=ax, keepdims=True)
        a._accumulate(out * (g - inner))

    return _make("softmax", out, (a,), backward)


def sum_(a: Tensor, axis: int | None = None) -> Tensor:
    out = a.value.sum(axis=axis)

    def backward(g: Array) -> None:
        if axis is None or a.value.ndim == 1:
            a._accumulate(np.full_like(a.value, float(np.asarray(g))))
        elif axis == 0:
            a._accumulate(np.tile(g, (a.value.shape[0], 1)))
        else:
            a._accumulate(np.tile(np.asarray(g)[:, None], (1, a.value.shape[1])))

    return _make("sum", out, (a,), backward)


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    if a.value.size == 0:
        raise ShapeError("mean: empty tensor")
    n = a.value.size if axis is None else a.value.shape[axis]
    return scale(sum_(a, axis=axis), 1.0 / n)


def l2_normalize(a: Tensor) -> Tensor:
    """x / ||x||_2 for a vector; the zero vector maps to itself with zero gradient."""
    if a.value.ndim != 1:
        raise ShapeError(f"l2_normalize: expected a vector, got shape {a.shape}")
    norm = float(np.linalg.norm(a.value))
    if norm == 0.0:
        def backward_zero(g: Array) -> None:
            pass  # subgradient choice at the origin

        return _make("l2_normalize", np.zeros_like(a.value), (a,), backward_zero)
    out = a.value / norm

    def backward(g: Array) -> None:
        a._accumulate((g - out * np.dot(g, out)) / norm)

    return _make("l2_normalize", out, (a,), backward)


def l2_normalize_rows(a: Tensor) -> Tensor:
    """Row-wise L2 normalization of a matrix; zero rows stay zero."""
    if a.value.ndim != 2:
        raise ShapeError(f"l2_normalize_rows: expected a matrix, got shape {a.shape}")
    norms = np.linalg.norm(a.value, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    out = a.value / safe
    nonzero = (norms != 0.0).astype(np.float64)

    def backward(g: Array) -> None:
        inner = (g * out).sum(axis=1, keepdims=True)
        a._accumulate(nonzero * (g - out * inner) / safe)

    return _make("l2_normalize_rows", out, (a,), backward)


def cosine(a: Tensor, b: Tensor) -> Tensor:
    """Cosine similarity of two vectors; defined as 0 when either is zero."""
    if a.value.ndim != 1 or b.value.ndim != 1:
        raise ShapeError(f"cosine: expected vectors, got {a.shape} and {b.shape}")
    _same_shape("cosine", a, b)
    na = float(np.linalg.norm(a.value))
    nb = float(np.linalg.norm(b.value))
    if na == 0.0 or nb == 0.0:
        def backward_zero(g: Array) -> None:
            pass

        return _make("cosine", np.float64(0.0), (a, b), backward_zero)
    av, bv = a.value, b.value
    c = float(np.dot(av, bv) / (na * nb))

    def backward(g: Array) -> None:
        gf = float(np.asarray(g))
        a._accumulate(gf * (bv / (na * nb) - c * av / (na * na)))
        b._accumulate(gf * (av / (na * nb) - c * bv / (nb * nb)))

    return _make("cosine", np.float64(c), (a, b), backward)


class Adam:
    """Adam optimizer over a ParamStore; deterministic given iteration order."""

    def __init__(self, params: ParamStore, learning_rate: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m = {name: np.zeros_like(t.value) for name, t in params.items()}
        self._v = {name: np.zeros_like(t.value) for name, t in params.items()}
        self._t = 0

    def step(self) -> None:
        self._t += 1
        b1, b2 = self.beta1, self.beta2
        for name, tensor in self.params.items():
            grad = tensor.grad
            if grad is None:
                continue
            m = self._m[name]
            v = self._v[name]
            m *= b1
            m += (1.0 - b1) * grad
            v *= b2
            v += (1.0 - b2) * grad * grad
            m_hat = m / (1.0 - b1 ** self._t)
            v_hat = v / (1.0 - b2 ** self._t)
            tensor.value = tensor.value - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def grad_check(function: Callable[[], Tensor], params: ParamStore,
               probe_count: int = 20, epsilon: float = 1e-5, seed: int = 0) -> float:
    """Max relative error between analytic and central-finite-difference gradients.

    ``function`` must rebuild its computation (inside its own ``record()``
    block) from the current parameter values on every call and return a
    scalar tensor.  Relative error is |a - n| / max(1e-8, |a| + |n|) over
    ``probe_count`` randomly chosen parameter coordinates.
    """
    params.zero_grad()
    out = function()
    out.tape.backward(out)
    analytic = {name: (np.zeros_like(t.value) if t.grad is None else t.grad.copy())
                for name, t in params.items()}
    params.zero_grad()

    names = params.names()
    sizes = [params[n].value.size for n in names]
    total = sum(sizes)
    if total == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    flat_choices = rng.integers(0, total, size=probe_count)

    max_rel = 0.0
    for flat in flat_choices:
        acc = int(flat)
        for name, size in zip(names, sizes):
            if acc < size:
                break
            acc -= size
        tensor = params[name]
        index = np.unravel_index(acc, tensor.value.shape)
        original = tensor.value[index]
        tensor.value[index] = original + epsilon
        f_plus = float(function().value)
        tensor.value[index] = original - epsilon
        f_minus = float(function().value)
        tensor.value[index] = original
        numeric = (f_plus - f_minus) / (2.0 * epsilon)
        a = float(analytic[name][index])
        rel = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
        max_rel = max(max_rel, rel)
    return max_rel
