from collections.abc import Callable

import numpy as np
import pytest

from src import autodiff as ad
from src.autodiff import Adam, AdamState, Parameter, Tensor, adam_step, finite_diff_check
from src.errors import AutodiffError, NonFiniteError, ShapeError


def _param(name: str, rows: int, cols: int, seed: int = 0) -> Parameter:
    rng = np.random.default_rng(seed)
    return Parameter(rng.normal(size=(rows, cols)), name=name)


UNARY_OPS: dict[str, Callable[[Tensor], Tensor]] = {
    'tanh': ad.tanh,
    'softmax_rows': ad.softmax_rows,
    'mean_rows': ad.mean_rows,
    'transpose': ad.transpose,
    'scale': lambda t: ad.scale(t, -1.7),
    'slice_cols': lambda t: ad.slice_cols(t, 1, 3),
    'gather_rows': lambda t: ad.gather_rows(t, [2, 0, 2]),
    'scatter_rows': lambda t: ad.scatter_rows(t, [3, 0, 3, 1], 5),
}


@pytest.mark.parametrize('name', sorted(UNARY_OPS))
def test_unary_gradients_match_finite_differences(name: str) -> None:
    a = _param('a', 4, 3)
    op = UNARY_OPS[name]

    def loss() -> Tensor:
        out = op(a)
        mix = ad.constant(np.random.default_rng(1).normal(size=out.shape))
        return ad.sum_all(ad.hadamard(out, mix))

    report = finite_diff_check(loss, [a])

    assert report.passed, report.entries


def test_binary_gradients_match_finite_differences() -> None:
    a = _param('a', 3, 4, seed=1)
    b = _param('b', 4, 2, seed=2)
    c = _param('c', 3, 2, seed=3)
    bias = _param('bias', 1, 2, seed=4)

    def loss() -> Tensor:
        h = ad.add(ad.matmul(a, b), bias)
        h = ad.hadamard(h, c)
        h = ad.concat_cols(h, c)
        h = ad.concat_rows([h, ad.tanh(h)])
        return ad.cross_entropy(h, [0, 1, 3, 2, 0, 1])

    report = finite_diff_check(loss, [a, b, c, bias])

    assert report.passed, report.entries
    assert {e.name for e in report.entries} == {'a', 'b', 'c', 'bias'}


def test_relu_gradient_excludes_kinks() -> None:
    a = Parameter(np.array([[0.0, 1.5, -2.0]]), name='a')

    report = finite_diff_check(lambda: ad.sum_all(ad.relu(a)), [a])

    assert report.passed
    assert report.entries[0].excluded == ((0, 0),)
    assert a.grad.tolist() == [[0.0, 1.0, 0.0]]


def test_add_broadcasts_row_vector() -> None:
    a = _param('a', 3, 2)
    bias = _param('bias', 1, 2)

    ad.backward(ad.sum_all(ad.add(a, bias)))

    assert bias.grad.tolist() == [[3.0, 3.0]]


def test_gather_accumulates_repeated_rows() -> None:
    a = Parameter(np.ones((3, 2)), name='a')

    ad.backward(ad.sum_all(ad.gather_rows(a, [1, 1, 2])))

    assert a.grad.tolist() == [[0.0, 0.0], [2.0, 2.0], [1.0, 1.0]]


def test_softmax_rows_are_distributions() -> None:
    out = ad.softmax_rows(ad.constant([[1000.0, 1000.0], [0.0, -1000.0]]))

    assert np.allclose(out.data.sum(axis=1), 1.0)
    assert np.allclose(out.data[0], 0.5)


def test_shape_errors() -> None:
    with pytest.raises(ShapeError):
        ad.matmul(ad.constant(np.ones((2, 3))), ad.constant(np.ones((2, 3))))
    with pytest.raises(ShapeError):
        ad.concat_cols(ad.constant(np.ones((2, 1))), ad.constant(np.ones((3, 1))))
    with pytest.raises(ShapeError):
        ad.mean_rows(ad.constant(np.ones((0, 2))))
    with pytest.raises(ShapeError):
        ad.cross_entropy(ad.constant(np.ones((2, 3))), [0])
    with pytest.raises(AutodiffError):
        ad.gather_rows(ad.constant(np.ones((2, 2))), [2])


def test_non_finite_values_are_rejected() -> None:
    with pytest.raises(NonFiniteError):
        Tensor([[np.inf]])
    with pytest.raises(NonFiniteError):
        ad.scale(ad.constant([[1e308]]), 10.0)


def test_backward_requires_trainable_scalar() -> None:
    with pytest.raises(AutodiffError):
        ad.backward(ad.sum_all(ad.constant(np.ones((2, 2)))))
    with pytest.raises(ShapeError):
        ad.backward(_param('a', 2, 2))


def test_tape_lists_each_tensor_once_parents_first() -> None:
    a = _param('a', 2, 2)
    h = ad.matmul(a, a)
    loss = ad.sum_all(ad.add(h, h))

    tape = ad.backward(loss)

    positions = {id(node): i for i, node in enumerate(tape.nodes)}
    assert len(positions) == len(tape) == 4
    assert positions[id(a)] < positions[id(h)] < positions[id(loss)]
    assert np.allclose(a.grad, 2.0 * (np.ones((2, 2)) @ a.data.T + a.data.T @ np.ones((2, 2))))


def test_adam_first_step_moves_by_learning_rate() -> None:
    p = Parameter(np.array([[1.0, -1.0]]), name='p')
    state = AdamState()

    adam_step([p], [np.array([[0.5, -3.0]])], lr=0.1, weight_decay=0.0, state=state)

    assert p.data == pytest.approx(np.array([[0.9, -0.9]]), abs=1e-6)
    assert state.steps == {'p': 1}


def test_adam_weight_decay_is_decoupled() -> None:
    p = Parameter(np.array([[2.0]]), name='p')

    adam_step([p], [np.zeros((1, 1))], lr=0.1, weight_decay=0.5, state=AdamState())

    assert p.data[0, 0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0)


def test_adam_counts_steps_per_parameter() -> None:
    a = Parameter(np.ones((1, 1)), name='a')
    b = Parameter(np.ones((1, 1)), name='b')
    optimizer = Adam(lr=0.01)

    a.grad[...] = 1.0
    optimizer.step([a])
    b.grad[...] = 1.0
    optimizer.step([a, b])

    assert optimizer.state.steps == {'a': 2, 'b': 1}
    optimizer.zero_grad([a, b])
    assert a.grad.tolist() == [[0.0]] and b.grad.tolist() == [[0.0]]


def test_cross_entropy_of_uniform_logits_is_log_classes() -> None:
    loss = ad.cross_entropy(ad.constant(np.full((4, 5), 0.3)), [0, 1, 4, 2])

    assert loss.item() == pytest.approx(np.log(5.0), abs=1e-12)


def test_matmul_by_identity_is_unchanged() -> None:
    a = _param('a', 3, 4)

    assert np.array_equal(ad.matmul(a, ad.constant(np.eye(4))).data, a.data)
    assert np.array_equal(ad.matmul(ad.constant(np.eye(3)), a).data, a.data)


def test_softmax_rows_ignore_per_row_shifts() -> None:
    logits = np.random.default_rng(5).normal(size=(4, 6))
    shifts = np.array([[-3.0], [0.0], [7.5], [250.0]])

    plain = ad.softmax_rows(ad.constant(logits)).data
    shifted = ad.softmax_rows(ad.constant(logits + shifts)).data

    assert np.allclose(plain.sum(axis=1), 1.0, rtol=0.0, atol=1e-12)
    assert np.allclose(plain, shifted, rtol=0.0, atol=1e-12)


def test_adam_zero_gradient_leaves_parameters_alone() -> None:
    p = Parameter(np.array([[1.5, -0.25]]), name='p')
    state = AdamState()

    for _ in range(3):
        adam_step([p], [np.zeros((1, 2))], lr=0.1, weight_decay=0.0, state=state)

    assert p.data.tolist() == [[1.5, -0.25]]


def test_adam_minimizes_a_quadratic() -> None:
    x = Parameter(np.array([[3.0]]), name='x')
    optimizer = Adam(lr=0.1)
    losses = []

    for _ in range(200):
        optimizer.zero_grad([x])
        loss = ad.sum_all(ad.hadamard(x, x))
        losses.append(loss.item())
        ad.backward(loss)
        optimizer.step([x])

    assert all(later < earlier for earlier, later in zip(losses[:20], losses[1:21]))
    assert losses[-1] < 0.01 * losses[0]
