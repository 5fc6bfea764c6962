"""Core tensor/autodiff tests: hand values, finite-difference oracles, and a
seeded property sweep that grad-checks every differentiable op."""

import numpy as np
import pytest

import tinydistill.tensor as T
from tinydistill.errors import MaskError, NumericsError, ShapeError, VocabError
from tinydistill.rng import Rng
from tinydistill.tensor import Tensor, grad_check


def fd_gradient(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Independent central-difference oracle over a raw numpy array."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = f()
        flat[i] = orig - eps
        f_minus = f()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2 * eps)
    return g


class TestMatmul:
    def test_identity(self):
        out = T.matmul(Tensor([[1.0, 0.0], [0.0, 1.0]]), Tensor([[3.0], [4.0]]))
        assert out.data.tolist() == [[3.0], [4.0]]

    def test_row_times_column(self):
        out = T.matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]]))
        assert out.data.tolist() == [[11.0]]

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
        with pytest.raises(ShapeError):
            T.matmul(Tensor(np.ones(3)), Tensor(np.ones((3, 2))))

    def test_backward_matches_finite_differences(self):
        rng = np.random.Generator(np.random.Philox(key=11))
        a_val = rng.uniform(-1, 1, (3, 4))
        b_val = rng.uniform(-1, 1, (4, 2))
        a, b = Tensor(a_val.copy(), requires_grad=True), Tensor(b_val.copy(), requires_grad=True)
        out = T.sum_all(T.matmul(a, b))
        out.backward()

        num_a = fd_gradient(lambda: float((a_val @ b_val).sum()), a_val)
        num_b = fd_gradient(lambda: float((a_val @ b_val).sum()), b_val)
        np.testing.assert_allclose(a.grad, num_a, rtol=1e-6, atol=1e-9)
        np.testing.assert_allclose(b.grad, num_b, rtol=1e-6, atol=1e-9)


class TestElementwise:
    def test_tanh_zero(self):
        assert T.tanh(Tensor([0.0])).data[0] == 0.0

    def test_sigmoid_zero(self):
        assert T.sigmoid(Tensor([0.0])).data[0] == 0.5

    def test_sigmoid_extremes_stay_finite(self):
        out = T.sigmoid(Tensor([-1000.0, 1000.0]))
        assert out.data[0] == 0.0 and out.data[1] == 1.0

    def test_tanh_backward_at_0p3(self):
        x = Tensor([0.3], requires_grad=True)
        T.sum_all(T.tanh(x)).backward()
        x_val = np.array([0.3])
        num = fd_gradient(lambda: float(np.tanh(x_val).sum()), x_val, eps=1e-6)
        assert abs(x.grad[0] - num[0]) < 1e-8

    def test_add_row_broadcast(self):
        x = Tensor(np.zeros((2, 3)))
        row = Tensor([1.0, 2.0, 3.0])
        out = T.add(x, row)
        np.testing.assert_array_equal(out.data, [[1, 2, 3], [1, 2, 3]])

    def test_scalar_broadcast(self):
        out = T.mul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([2.0]))
        np.testing.assert_array_equal(out.data, [[2, 4], [6, 8]])

    def test_column_broadcast_rejected(self):
        with pytest.raises(ShapeError):
            T.add(Tensor(np.zeros((3, 2))), Tensor(np.zeros((3, 1))))

    def test_row_broadcast_grad_sums_over_rows(self):
        row = Tensor([1.0, 2.0], requires_grad=True)
        T.sum_all(T.add(Tensor(np.zeros((4, 2))), row)).backward()
        np.testing.assert_array_equal(row.grad, [4.0, 4.0])


class TestSoftmaxRows:
    def test_symmetry(self):
        out = T.softmax_rows(Tensor([[0.0, 0.0]]))
        assert out.data.tolist() == [[0.5, 0.5]]

    def test_no_overflow_on_huge_inputs(self):
        out = T.softmax_rows(Tensor([[1000.0, 1000.0]]))
        assert out.data.tolist() == [[0.5, 0.5]]

    def test_against_high_precision_oracle(self):
        # frozen from a 50-digit mpmath evaluation of exp(x)/sum(exp(x))
        expected = [0.09003057317038046, 0.24472847105479764, 0.6652409557748219]
        out = T.softmax_rows(Tensor([[1.0, 2.0, 3.0]]))
        np.testing.assert_allclose(out.data[0], expected, rtol=0, atol=1e-12)

    def test_rows_sum_to_one_and_shift_invariance(self):
        rng = np.random.Generator(np.random.Philox(key=5))
        for _ in range(50):
            x = rng.uniform(-30, 30, (4, 6))
            s = T.softmax_rows(Tensor(x)).data
            np.testing.assert_allclose(s.sum(axis=1), 1.0, rtol=0, atol=1e-9)
            shifted = T.softmax_rows(Tensor(x + rng.uniform(-5, 5, (4, 1)))).data
            np.testing.assert_allclose(shifted, s, rtol=0, atol=1e-12)


class TestConcat:
    def test_1d(self):
        out = T.concat([Tensor([1.0, 2.0]), Tensor([3.0])], axis=0)
        assert out.data.tolist() == [1.0, 2.0, 3.0]

    def test_empty_operand(self):
        a = Tensor(np.arange(6, dtype=float).reshape(2, 3))
        empty = Tensor(np.zeros((2, 0)))
        out = T.concat([a, empty], axis=1)
        np.testing.assert_array_equal(out.data, a.data)

    def test_dim_mismatch(self):
        with pytest.raises(ShapeError):
            T.concat([Tensor(np.zeros((2, 3))), Tensor(np.zeros((3, 3)))], axis=1)

    def test_gradient_routes_ones_to_both_inputs(self):
        a = Tensor([1.0, 2.0], requires_grad=True)
        b = Tensor([3.0], requires_grad=True)
        T.sum_all(T.concat([a, b], axis=0)).backward()
        np.testing.assert_array_equal(a.grad, [1.0, 1.0])
        np.testing.assert_array_equal(b.grad, [1.0])


class TestFiniteness:
    def test_overflowing_op_is_caught_and_named(self):
        big = Tensor(np.full((2, 2), 1e308))
        with np.errstate(over="ignore"):
            with pytest.raises(NumericsError) as err:
                T.matmul(big, big)
        assert "matmul" in str(err.value)

    def test_nan_input_rejected_at_creation(self):
        with pytest.raises(NumericsError):
            Tensor([np.nan])


class TestBackwardContract:
    def test_non_scalar_root_rejected(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        with pytest.raises(ShapeError):
            T.add(x, x).backward()

    def test_grad_accumulates_across_shared_use(self):
        x = Tensor([2.0], requires_grad=True)
        y = T.add(T.mul(x, x), x)  # x^2 + x -> dy/dx = 2x + 1 = 5
        T.sum_all(y).backward()
        assert x.grad[0] == pytest.approx(5.0, abs=1e-12)

    def test_ops_are_pure(self):
        x = Tensor(np.linspace(-2, 2, 12).reshape(3, 4))
        first = T.softmax_rows(T.tanh(x)).data
        second = T.softmax_rows(T.tanh(x)).data
        assert np.array_equal(first, second)

    def test_dropout_pure_given_same_rng_state(self):
        x = Tensor(np.ones((8, 8)))
        a = T.dropout(x, 0.5, "train", Rng(3)).data
        b = T.dropout(x, 0.5, "train", Rng(3)).data
        assert np.array_equal(a, b)


class TestGradCheckHarness:
    def test_square_function(self):
        x = Tensor([3.0], requires_grad=True)
        report = grad_check(lambda: T.mul(x, x), {"x": x}, eps=1e-5, tol=1e-4)
        assert report.passed
        assert report.max_rel_err < 1e-8

    def test_constant_function(self):
        x = Tensor([1.0, -2.0], requires_grad=True)
        c = Tensor([7.0])
        report = grad_check(lambda: T.sum_all(T.mul(c, c)), {"x": x}, eps=1e-5, tol=1e-4)
        assert report.passed
        assert report.max_rel_err == 0.0

    def test_eps_bounds_enforced(self):
        x = Tensor([1.0], requires_grad=True)
        with pytest.raises(ValueError):
            grad_check(lambda: T.sum_all(x), {"x": x}, eps=1e-2)

    def test_full_bilstm_attention_loss_toy_batch(self):
        # 2-sentence toy batch through the whole recurrent + attention stack
        from tinydistill.layers import ModelConfig, build_model
        from tinydistill.objectives import cross_entropy

        cfg = ModelConfig(arch="bilstm_attn", vocab_size=9, embed_dim=3,
                          hidden_dim=2, max_len=8)
        model = build_model(cfg, Rng(17).child("init"))
        ids = np.array([[2, 3, 4, 0], [5, 6, 0, 0]])
        mask = ids != 0
        labels = np.array([1, 0])

        def loss():
            return cross_entropy(model.forward(ids, mask), labels)

        report = grad_check(loss, model.params(), eps=1e-5, tol=1e-4)
        assert report.passed, report.per_param


def _rand(rng, *shape):
    return rng.uniform(-1.5, 1.5, shape)


def _op_cases(seed: int):
    """One grad-check case per differentiable op, freshly randomized."""
    rng = Rng(seed)
    c = []

    x = Tensor(_rand(rng, 3, 4), requires_grad=True)
    y = Tensor(_rand(rng, 3, 4), requires_grad=True)
    row = Tensor(_rand(rng, 4), requires_grad=True)
    scalar = Tensor(_rand(rng, 1), requires_grad=True)
    c.append(("add", lambda: T.sum_all(T.add(x, y)), {"x": x, "y": y}))
    c.append(("add_row", lambda: T.sum_all(T.add(x, row)), {"x": x, "row": row}))
    c.append(("mul", lambda: T.sum_all(T.mul(x, y)), {"x": x, "y": y}))
    c.append(("mul_scalar", lambda: T.sum_all(T.mul(x, scalar)), {"x": x, "s": scalar}))
    c.append(("scale", lambda: T.sum_all(T.scale(x, -0.7)), {"x": x}))
    c.append(("tanh", lambda: T.sum_all(T.tanh(x)), {"x": x}))
    c.append(("sigmoid", lambda: T.sum_all(T.sigmoid(x)), {"x": x}))

    # keep relu inputs away from the kink at 0
    relu_in = Tensor(np.sign(_rand(rng, 3, 4)) * (0.3 + np.abs(_rand(rng, 3, 4))),
                     requires_grad=True)
    c.append(("relu", lambda: T.sum_all(T.relu(relu_in)), {"x": relu_in}))

    a2 = Tensor(_rand(rng, 2, 3), requires_grad=True)
    b2 = Tensor(_rand(rng, 3, 2), requires_grad=True)
    c.append(("matmul", lambda: T.sum_all(T.matmul(a2, b2)), {"a": a2, "b": b2}))

    lx = Tensor(_rand(rng, 3, 4), requires_grad=True)
    lw = Tensor(_rand(rng, 2, 4), requires_grad=True)
    lb = Tensor(_rand(rng, 2), requires_grad=True)
    c.append(("linear", lambda: T.sum_all(T.linear(lx, lw, lb)), {"x": lx, "w": lw, "b": lb}))

    sm = Tensor(_rand(rng, 3, 5), requires_grad=True)
    mix = Tensor(_rand(rng, 3, 5))
    c.append(("softmax_rows", lambda: T.sum_all(T.mul(T.softmax_rows(sm), mix)), {"x": sm}))

    msk = rng.random((3, 5)) < 0.7
    msk[:, 0] = True
    c.append(
        ("masked_softmax_rows",
         lambda: T.sum_all(T.mul(T.masked_softmax_rows(sm, msk), mix)),
         {"x": sm})
    )

    concat_mix = Tensor(_rand(rng, 2, 5))
    c.append(("concat", lambda: T.sum_all(T.mul(T.concat([a2, T.matmul(a2, b2)], axis=1),
                                                concat_mix)),
              {"a": a2, "b": b2}))
    reshape_mix = Tensor(_rand(rng, 4, 3))
    c.append(("reshape", lambda: T.sum_all(T.mul(T.reshape(x, (4, 3)), reshape_mix)),
              {"x": x}))
    c.append(("slice_cols", lambda: T.sum_all(T.slice_cols(x, 1, 3)), {"x": x}))

    x3 = Tensor(_rand(rng, 2, 4, 3), requires_grad=True)
    c.append(("time_slice", lambda: T.sum_all(T.time_slice(x3, 2)), {"x": x3}))
    c.append(("time_window", lambda: T.sum_all(T.time_window(x3, 1, 2)), {"x": x3}))

    s1 = Tensor(_rand(rng, 2, 3), requires_grad=True)
    s2 = Tensor(_rand(rng, 2, 3), requires_grad=True)
    c.append(("stack_time", lambda: T.sum_all(T.stack_time([s1, s2])), {"a": s1, "b": s2}))

    table = Tensor(_rand(rng, 6, 3), requires_grad=True)
    ids = np.array([[1, 2, 5], [3, 3, 4]])
    c.append(("embedding_lookup",
              lambda: T.sum_all(T.embedding_lookup(table, ids)), {"table": table}))

    w_t = Tensor(_rand(rng, 2, 4), requires_grad=True)
    seq = Tensor(_rand(rng, 2, 4, 3), requires_grad=True)
    c.append(("weighted_time_sum",
              lambda: T.sum_all(T.weighted_time_sum(seq, w_t)), {"seq": seq, "w": w_t}))

    # well-separated maxima so finite differences never cross the argmax
    mm_base = rng.uniform(-1, 1, (3, 4))
    mm_base[:, 1] += 3.0
    mm = Tensor(mm_base, requires_grad=True)
    valid = np.ones((3, 4), dtype=bool)
    valid[:, 3] = False
    c.append(("masked_max_over_time",
              lambda: T.sum_all(T.masked_max_over_time(mm, valid)), {"x": mm}))

    col = rng.uniform(0.5, 2.0, (3, 1))
    c.append(("scale_rows", lambda: T.sum_all(T.scale_rows(x, col)), {"x": x}))

    c.append(("dropout",
              lambda: T.sum_all(T.dropout(x, 0.4, "train", Rng(99))), {"x": x}))

    from tinydistill.objectives import cross_entropy, mse_logits

    logits = Tensor(_rand(rng, 3, 2), requires_grad=True)
    labels = np.array([0, 1, 1])
    c.append(("cross_entropy", lambda: cross_entropy(logits, labels), {"logits": logits}))
    teacher = _rand(rng, 3, 2)
    c.append(("mse_logits", lambda: mse_logits(logits, Tensor(teacher)), {"logits": logits}))
    return c


@pytest.mark.parametrize("seed", range(6))
def test_every_op_passes_grad_check(seed):
    # 6 seeds x ~24 ops > 100 randomized trials at float64, tol 1e-4
    for name, f, params in _op_cases(seed):
        report = grad_check(f, params, eps=1e-5, tol=1e-4)
        assert report.passed, f"{name} (seed {seed}): {report.per_param}"


class TestModelSpecificOps:
    def test_embedding_out_of_range(self):
        table = Tensor(np.zeros((4, 2)), requires_grad=True)
        with pytest.raises(VocabError):
            T.embedding_lookup(table, np.array([[1, 4]]))

    def test_masked_softmax_all_masked_row(self):
        with pytest.raises(MaskError):
            T.masked_softmax_rows(Tensor(np.zeros((2, 3))), np.array([[True, True, True],
                                                                      [False, False, False]]))

    def test_masked_max_requires_a_valid_position(self):
        with pytest.raises(MaskError):
            T.masked_max_over_time(Tensor(np.zeros((1, 3))), np.zeros((1, 3), dtype=bool))

    def test_dropout_rate_validation(self):
        x = Tensor(np.ones((2, 2)))
        with pytest.raises(ValueError):
            T.dropout(x, 1.0, "train", Rng(0))

    def test_dropout_identity_cases(self):
        x = Tensor(np.ones((2, 2)))
        assert T.dropout(x, 0.0, "train", Rng(0)) is x
        assert T.dropout(x, 0.5, "eval") is x
