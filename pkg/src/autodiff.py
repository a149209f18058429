"""Dense float64 reverse-mode differentiation for the CaCoSE forward pass.

Every tensor is 2-D. Ops record their parents and a closure that pushes the
output gradient back into the parents; :func:`backward` orders the recorded
graph into a :class:`Tape` and replays it in reverse, visiting each node once.
Broadcasting is limited to adding a ``1 x cols`` row to every row.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from src.errors import AutodiffError, NonFiniteError, ShapeError

Backward = Callable[[np.ndarray], None]


class Tensor:
    __slots__ = ('data', 'requires_grad', 'grad', 'op', '_parents', '_backward')

    def __init__(
        self,
        data: np.ndarray | Sequence[float] | float,
        *,
        requires_grad: bool = False,
        op: str = 'leaf',
        _parents: tuple[Tensor, ...] = (),
    ) -> None:
        array = np.array(data, dtype=np.float64)
        if array.ndim == 0:
            array = array.reshape(1, 1)
        elif array.ndim == 1:
            array = array.reshape(1, -1)
        elif array.ndim > 2:
            raise ShapeError(op, array.shape)
        if not np.all(np.isfinite(array)):
            raise NonFiniteError(op)
        self.data = array
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(array) if requires_grad else None
        self.op = op
        self._parents = _parents
        self._backward: Backward | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape  # type: ignore[return-value]

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def item(self) -> float:
        if self.shape != (1, 1):
            raise ShapeError('item', self.shape)
        return float(self.data[0, 0])

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def __repr__(self) -> str:
        return f'Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})'


class Parameter(Tensor):
    """Named trainable tensor."""

    __slots__ = ('name',)

    def __init__(self, data: np.ndarray, name: str) -> None:
        super().__init__(data, requires_grad=True, op='parameter')
        self.name = name

    def __repr__(self) -> str:
        return f'Parameter({self.name!r}, shape={self.shape})'


def constant(data: np.ndarray | Sequence[float] | float) -> Tensor:
    return Tensor(data, op='constant')


def glorot_uniform(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    limit = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def _result(data: np.ndarray, op: str, parents: tuple[Tensor, ...], backward: Backward) -> Tensor:
    requires = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=requires, op=op, _parents=parents if requires else ())
    if requires:
        out._backward = backward
    return out


def _accumulate(t: Tensor, grad: np.ndarray) -> None:
    if t.requires_grad:
        t.grad += grad


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise ShapeError('matmul', a.shape, b.shape)

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _result(a.data @ b.data, 'matmul', (a, b), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may be a ``1 x cols`` row added to every row of ``a``."""
    row_bias = b.rows == 1 and a.rows != 1 and a.cols == b.cols
    if a.shape != b.shape and not row_bias:
        raise ShapeError('add', a.shape, b.shape)

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g)
        _accumulate(b, g.sum(axis=0, keepdims=True) if row_bias else g)

    return _result(a.data + b.data, 'add', (a, b), backward)


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError('hadamard', a.shape, b.shape)

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    return _result(a.data * b.data, 'hadamard', (a, b), backward)


def scale(a: Tensor, s: float) -> Tensor:
    def backward(g: np.ndarray) -> None:
        _accumulate(a, g * s)

    return _result(a.data * s, 'scale', (a,), backward)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g * mask)

    return _result(np.where(mask, a.data, 0.0), 'relu', (a,), backward)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g * (1.0 - out * out))

    return _result(out, 'tanh', (a,), backward)


def softmax_rows(a: Tensor) -> Tensor:
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    out = exp / exp.sum(axis=1, keepdims=True)

    def backward(g: np.ndarray) -> None:
        _accumulate(a, out * (g - (g * out).sum(axis=1, keepdims=True)))

    return _result(out, 'softmax_rows', (a,), backward)


def mean_rows(a: Tensor) -> Tensor:
    """Column means as a ``1 x cols`` row."""
    if a.rows == 0:
        raise ShapeError('mean_rows', a.shape)
    n = a.rows

    def backward(g: np.ndarray) -> None:
        _accumulate(a, np.repeat(g / n, n, axis=0))

    return _result(a.data.mean(axis=0, keepdims=True), 'mean_rows', (a,), backward)


def sum_all(a: Tensor) -> Tensor:
    def backward(g: np.ndarray) -> None:
        _accumulate(a, np.full(a.shape, g[0, 0]))

    return _result(np.array([[a.data.sum()]]), 'sum_all', (a,), backward)


def transpose(a: Tensor) -> Tensor:
    def backward(g: np.ndarray) -> None:
        _accumulate(a, g.T)

    return _result(a.data.T, 'transpose', (a,), backward)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.rows != b.rows:
        raise ShapeError('concat_cols', a.shape, b.shape)
    split = a.cols

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g[:, :split])
        _accumulate(b, g[:, split:])

    return _result(np.concatenate([a.data, b.data], axis=1), 'concat_cols', (a, b), backward)


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise ShapeError('concat_rows')
    cols = parts[0].cols
    if any(p.cols != cols for p in parts):
        raise ShapeError('concat_rows', *(p.shape for p in parts))
    offsets = np.cumsum([0] + [p.rows for p in parts])

    def backward(g: np.ndarray) -> None:
        for part, lo, hi in zip(parts, offsets[:-1], offsets[1:], strict=True):
            _accumulate(part, g[lo:hi])

    data = np.concatenate([p.data for p in parts], axis=0)
    return _result(data, 'concat_rows', tuple(parts), backward)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if not 0 <= start < stop <= a.cols:
        raise ShapeError('slice_cols', a.shape, (start, stop))

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a.grad[:, start:stop] += g

    return _result(a.data[:, start:stop], 'slice_cols', (a,), backward)


def _check_index(op: str, idx: np.ndarray, bound: int) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= bound):
        raise AutodiffError(f'{op}: index out of range for {bound} rows')
    return idx


def gather_rows(a: Tensor, idx: Sequence[int] | np.ndarray) -> Tensor:
    """Rows ``a[idx]``; repeated indices are allowed and accumulate on backward."""
    idx = _check_index('gather_rows', np.asarray(idx), a.rows)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            np.add.at(a.grad, idx, g)

    return _result(a.data[idx], 'gather_rows', (a,), backward)


def scatter_rows(a: Tensor, idx: Sequence[int] | np.ndarray, num_rows: int) -> Tensor:
    """Sum row ``i`` of ``a`` into row ``idx[i]`` of a zero ``num_rows x cols`` matrix."""
    idx = _check_index('scatter_rows', np.asarray(idx), num_rows)
    if idx.size != a.rows:
        raise ShapeError('scatter_rows', a.shape, (idx.size,))
    out = np.zeros((num_rows, a.cols))
    np.add.at(out, idx, a.data)

    def backward(g: np.ndarray) -> None:
        _accumulate(a, g[idx])

    return _result(out, 'scatter_rows', (a,), backward)


def cross_entropy(logits: Tensor, targets: Sequence[int] | np.ndarray) -> Tensor:
    """Mean negative log-likelihood of ``targets`` under row-wise softmax."""
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if targets.size != logits.rows or logits.rows == 0:
        raise ShapeError('cross_entropy', logits.shape, targets.shape)
    if targets.min() < 0 or targets.max() >= logits.cols:
        raise AutodiffError(f'cross_entropy: target out of range for {logits.cols} classes')
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    rows = np.arange(targets.size)
    loss = -log_probs[rows, targets].mean()

    def backward(g: np.ndarray) -> None:
        probs = np.exp(log_probs)
        probs[rows, targets] -= 1.0
        _accumulate(logits, probs * (g[0, 0] / targets.size))

    return _result(np.array([[loss]]), 'cross_entropy', (logits,), backward)


@dataclass(frozen=True)
class Tape:
    """Recorded tensors in execution-consistent topological order."""

    nodes: tuple[Tensor, ...]

    def __len__(self) -> int:
        return len(self.nodes)


def build_tape(output: Tensor) -> Tape:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(output, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return Tape(nodes=tuple(order))


def backward(loss: Tensor) -> Tape:
    """Accumulate ``d loss / d t`` into ``t.grad`` for every tensor that requires it."""
    if loss.shape != (1, 1):
        raise ShapeError('backward', loss.shape)
    if not loss.requires_grad:
        raise AutodiffError('backward: loss does not depend on any trainable tensor')
    tape = build_tape(loss)
    loss.grad += 1.0
    for node in reversed(tape.nodes):
        if node._backward is not None:
            node._backward(node.grad)
    for node in tape.nodes:
        if node.grad is not None and not np.all(np.isfinite(node.grad)):
            raise NonFiniteError(f'backward through {node.op}')
    return tape


@dataclass
class AdamState:
    steps: dict[str, int] = field(default_factory=dict)
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Sequence[Parameter],
    grads: Sequence[np.ndarray],
    *,
    lr: float,
    weight_decay: float,
    state: AdamState,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """In-place Adam update with decoupled weight decay.

    Moments and bias-correction counters are kept per parameter name, so
    parameters created mid-training start their own schedule.
    """
    for param, grad in zip(params, grads, strict=True):
        step = state.steps.get(param.name, 0) + 1
        state.steps[param.name] = step
        m = state.m.setdefault(param.name, np.zeros_like(param.data))
        v = state.v.setdefault(param.name, np.zeros_like(param.data))
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        m_hat = m / (1.0 - beta1**step)
        v_hat = v / (1.0 - beta2**step)
        decay = lr * weight_decay * param.data
        param.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
        param.data -= decay


class Adam:
    """Stateful wrapper around :func:`adam_step` reading ``param.grad``."""

    def __init__(self, lr: float, weight_decay: float = 0.0) -> None:
        self.lr = lr
        self.weight_decay = weight_decay
        self.state = AdamState()

    def step(self, params: Sequence[Parameter]) -> None:
        adam_step(
            params,
            [p.grad for p in params],
            lr=self.lr,
            weight_decay=self.weight_decay,
            state=self.state,
        )

    @staticmethod
    def zero_grad(params: Sequence[Parameter]) -> None:
        for p in params:
            p.zero_grad()


@dataclass(frozen=True)
class GradCheckEntry:
    name: str
    max_rel_error: float
    checked: int
    excluded: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class GradCheckReport:
    entries: tuple[GradCheckEntry, ...]
    tolerance: float

    @property
    def max_rel_error(self) -> float:
        return max((e.max_rel_error for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def finite_diff_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    *,
    step: float = 1e-5,
    tol: float = 1e-4,
    abs_floor: float = 1e-6,
) -> GradCheckReport:
    """Compare backward gradients of ``f()`` against central differences.

    An entry whose one-sided slopes disagree at least as much as the central
    estimate disagrees with the analytic gradient sits on a kink (e.g. ReLU at
    zero); it is reported in ``excluded`` instead of counted as an error.
    """
    for p in params:
        p.zero_grad()
    base = f()
    backward(base)
    f0 = base.item()
    entries = []
    for i, p in enumerate(params):
        analytic = p.grad.copy()
        worst = 0.0
        excluded = []
        for idx in np.ndindex(*p.shape):
            original = p.data[idx]
            p.data[idx] = original + step
            f_plus = f().item()
            p.data[idx] = original - step
            f_minus = f().item()
            p.data[idx] = original
            central = (f_plus - f_minus) / (2.0 * step)
            error = abs(central - analytic[idx])
            rel = error / max(abs(central), abs(analytic[idx]), abs_floor)
            if rel >= tol:
                one_sided_gap = abs((f_plus - f0) / step - (f0 - f_minus) / step)
                if one_sided_gap >= error:
                    excluded.append(idx)
                    continue
            worst = max(worst, rel)
        name = getattr(p, 'name', f'param{i}')
        entries.append(
            GradCheckEntry(
                name=name, max_rel_error=worst, checked=p.data.size, excluded=tuple(excluded)
            )
        )
    return GradCheckReport(entries=tuple(entries), tolerance=tol)
