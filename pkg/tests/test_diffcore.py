import numpy as np
import pytest

from mind.diffcore import (
    MLP,
    AdamState,
    Tape,
    Tensor,
    adam_step,
    add,
    backward,
    concat,
    constant,
    exp,
    gather,
    load_checkpoint,
    log,
    log_softmax,
    make_plan,
    matmul,
    mean_all,
    mul,
    no_grad,
    param,
    reduce_sum,
    relu,
    reshape,
    save_checkpoint,
    scale,
    segment_log_softmax,
    segment_sum,
    select,
    sigmoid,
    sub,
    symmetric_eigh,
    transpose,
    validate_shapes,
    zero_grads,
)
from mind.errors import ContractError, ParseError

from oracles import finite_difference_grad


def check_grad(make_loss, x0, rtol=1e-6, h=1e-5):
    """Analytic gradient of make_loss vs central finite differences (f64)."""
    x0 = np.asarray(x0, dtype=np.float64)
    leaf = param(x0.copy())
    with Tape():
        loss = make_loss(leaf)
        backward(loss)
    analytic = leaf.grad.reshape(-1)

    def f(flat):
        l2 = param(flat.reshape(x0.shape))
        with Tape():
            return float(make_loss(l2).data)

    numeric = finite_difference_grad(f, x0.reshape(-1).copy(), h=h)
    denom = np.maximum(np.abs(numeric), 1e-8)
    assert np.max(np.abs(analytic - numeric) / denom) < rtol, \
        f"max rel err {np.max(np.abs(analytic - numeric) / denom)}"


# -- per-op gradient checks (f64 central differences) ---------------------------

def test_grad_add_sub_mul():
    rng = np.random.default_rng(0)
    b = constant(rng.normal(size=(3, 4)))
    check_grad(lambda x: mean_all(mul(add(x, b), sub(x, b))), rng.normal(size=(3, 4)))


def test_grad_bias_broadcast():
    rng = np.random.default_rng(1)
    x = constant(rng.normal(size=(5, 4)))
    check_grad(lambda bias: mean_all(add(x, bias)), rng.normal(size=(4,)))


def test_grad_matmul_2d():
    rng = np.random.default_rng(2)
    b = constant(rng.normal(size=(4, 3)))
    check_grad(lambda x: mean_all(matmul(x, b)), rng.normal(size=(5, 4)))
    a = constant(rng.normal(size=(5, 4)))
    check_grad(lambda x: mean_all(matmul(a, x)), rng.normal(size=(4, 3)))


def test_grad_matmul_batched():
    rng = np.random.default_rng(3)
    b = constant(rng.normal(size=(3, 4, 2)))
    check_grad(lambda x: mean_all(matmul(x, b)), rng.normal(size=(3, 5, 4)))


def test_grad_transpose_reshape_concat():
    rng = np.random.default_rng(4)
    y = constant(rng.normal(size=(4, 6)))
    w = constant(rng.normal(size=(3, 16)))

    def loss(x):
        t = transpose(x, (1, 0, 2))            # (2,3,4) -> (3,2,4)
        r = reshape(t, (3, 8))
        c = concat([r, r], axis=1)             # (3,16)
        return mean_all(mul(c, w))

    check_grad(loss, rng.normal(size=(2, 3, 4)))
    check_grad(lambda x: mean_all(concat([x, y], axis=0)), rng.normal(size=(2, 6)))


def test_grad_nonlinearities():
    rng = np.random.default_rng(5)
    check_grad(lambda x: mean_all(relu(x)), rng.normal(size=(4, 4)) + 0.3)
    check_grad(lambda x: mean_all(sigmoid(x)), rng.normal(size=(4, 4)))
    check_grad(lambda x: mean_all(exp(x)), rng.normal(size=(3, 3)) * 0.5)
    check_grad(lambda x: mean_all(log(x)), rng.uniform(0.5, 2.0, size=(3, 3)))


def test_grad_reductions_and_select():
    rng = np.random.default_rng(6)
    check_grad(lambda x: reduce_sum(mul(x, x)), rng.normal(size=(3, 5)))
    check_grad(lambda x: mean_all(reduce_sum(x, axis=1)), rng.normal(size=(3, 5)))
    check_grad(lambda x: mean_all(select(x, 1, axis=0)), rng.normal(size=(3, 5)))
    check_grad(lambda x: mean_all(scale(x, 2.5)), rng.normal(size=(3, 5)))


def test_grad_log_softmax():
    rng = np.random.default_rng(7)
    w = constant(rng.normal(size=(4, 6)))
    check_grad(lambda x: mean_all(mul(log_softmax(x, axis=-1), w)), rng.normal(size=(4, 6)))


def test_grad_gather_and_segment_sum():
    rng = np.random.default_rng(8)
    idx = np.array([0, 2, 2, 1, 0, 3])
    plan = make_plan(idx, 4)
    w = constant(rng.normal(size=(6, 3)))

    def loss_gather(x):
        return mean_all(mul(gather(x, idx, axis=0, plan=plan), w))

    check_grad(loss_gather, rng.normal(size=(4, 3)))

    w2 = constant(rng.normal(size=(4, 3)))

    def loss_seg(x):
        return mean_all(mul(segment_sum(x, plan, axis=0), w2))

    check_grad(loss_seg, rng.normal(size=(6, 3)))


def test_grad_gather_stacked_axis1():
    rng = np.random.default_rng(9)
    idx = np.array([1, 1, 0, 2])
    plan = make_plan(idx, 3)
    w = constant(rng.normal(size=(2, 4, 5)))
    check_grad(lambda x: mean_all(mul(gather(x, idx, axis=1, plan=plan), w)),
               rng.normal(size=(2, 3, 5)))


def test_grad_segment_log_softmax():
    rng = np.random.default_rng(10)
    starts = np.array([0, 3, 5])
    counts = np.array([3, 2, 4])
    w = constant(rng.normal(size=9))

    def loss(x):
        lp = segment_log_softmax(x, starts, counts)
        p = exp(lp)
        return reduce_sum(mul(p, mul(lp, w)))

    check_grad(loss, rng.normal(size=9))


def test_grad_mlp_end_to_end():
    rng = np.random.default_rng(11)
    mlp = MLP(6, (8,), 1, out_act="sigmoid", rng=rng, dtype=np.float64)
    x = constant(rng.normal(size=(7, 6)))
    params = mlp.parameters()
    with Tape():
        loss = mean_all(mlp(x))
        backward(loss)
    for name, p in params.items():
        analytic = p.grad.copy().reshape(-1)
        base = p.data.copy()

        def f(flat, p=p, base=base):
            p.data = flat.reshape(base.shape)
            with Tape():
                out = float(mean_all(mlp(x)).data)
            p.data = base
            return out

        numeric = finite_difference_grad(f, base.reshape(-1).copy(), h=1e-6)
        denom = np.maximum(np.abs(numeric), 1e-8)
        assert np.max(np.abs(analytic - numeric) / denom) < 1e-4, name


# -- value-level examples -------------------------------------------------------------

def test_sigmoid_of_zero():
    assert float(sigmoid(constant(0.0)).data) == pytest.approx(0.5)


def test_matmul_identity():
    x = np.arange(12, dtype=np.float64).reshape(3, 4)
    out = matmul(constant(np.eye(3)), constant(x))
    assert np.allclose(out.data, x)


def test_log_softmax_equal_logits():
    out = log_softmax(constant(np.zeros((2, 5))), axis=-1)
    assert np.allclose(out.data, -np.log(5))


def test_grad_of_linear_sum_is_input():
    x = np.array([1.0, 2.0, 3.0])
    w = param(np.zeros((3, 2)))
    with Tape():
        loss = reduce_sum(matmul(constant(x[None, :]), w))
        backward(loss)
    assert np.allclose(w.grad, np.stack([x, x], axis=1))


def test_double_backward_rejected():
    w = param(np.ones(3))
    with Tape():
        loss = reduce_sum(mul(w, w))
        backward(loss)
        with pytest.raises(ContractError):
            backward(loss)


def test_backward_requires_scalar_and_tape():
    w = param(np.ones(3))
    with Tape():
        y = mul(w, w)
        with pytest.raises(ContractError):
            backward(y)
    with pytest.raises(ContractError):
        backward(constant(1.0))


def test_no_grad_suppresses_recording():
    w = param(np.ones(3))
    with Tape() as tape:
        with no_grad():
            y = reduce_sum(mul(w, w))
        assert not y.requires_grad
        assert len(tape.nodes) == 0


def test_grad_accumulates_across_uses():
    w = param(np.array([2.0]))
    with Tape():
        loss = add(reduce_sum(mul(w, w)), reduce_sum(scale(w, 3.0)))
        backward(loss)
    assert np.allclose(w.grad, [2 * 2.0 + 3.0])


def test_forward_deterministic():
    rng = np.random.default_rng(12)
    x = rng.normal(size=(50, 8)).astype(np.float32)
    mlp = MLP(8, (16,), 1, rng=np.random.default_rng(99))
    a = mlp(constant(x)).data
    b = mlp(constant(x)).data
    assert np.array_equal(a, b)


# -- Adam ------------------------------------------------------------------------------

def test_adam_first_step_magnitude():
    p = param(np.zeros(4))
    p.grad = np.ones(4)
    state = AdamState({"p": p}, lr=3e-4)
    adam_step({"p": p}, state)
    # bias correction makes mhat/sqrt(vhat) ~= 1 on the first step
    assert np.allclose(p.data, -3e-4, rtol=1e-4)


def test_adam_zero_grad_zero_update():
    p = param(np.full(3, 7.0))
    p.grad = np.zeros(3)
    state = AdamState({"p": p}, lr=3e-4)
    adam_step({"p": p}, state)
    assert np.allclose(p.data, 7.0)


def test_adam_lr_zero():
    p = param(np.full(3, 7.0))
    p.grad = np.ones(3)
    state = AdamState({"p": p}, lr=0.0)
    adam_step({"p": p}, state)
    assert np.array_equal(p.data, np.full(3, 7.0))


def test_adam_missing_grad_raises():
    p = param(np.zeros(3))
    state = AdamState({"p": p})
    with pytest.raises(ContractError):
        adam_step({"p": p}, state)


def test_zero_grads():
    p = param(np.zeros(3))
    p.grad = np.ones(3)
    zero_grads({"p": p})
    assert p.grad is None


# -- eigensolver -----------------------------------------------------------------------

def test_eigh_diagonal():
    w, V = symmetric_eigh(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(w, [1, 2, 3])
    assert np.allclose(np.abs(V), np.eye(3)[:, [1, 2, 0]])


def test_eigh_2x2_exchange():
    w, V = symmetric_eigh(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(w, [-1, 1])


def test_eigh_reconstruction_and_orthonormality():
    rng = np.random.default_rng(13)
    A = rng.normal(size=(40, 40))
    M = (A + A.T) / 2
    w, V = symmetric_eigh(M)
    assert np.linalg.norm(M - V @ np.diag(w) @ V.T) < 1e-8
    assert np.linalg.norm(V.T @ V - np.eye(40)) < 1e-8
    assert (np.diff(w) >= -1e-12).all()


def test_eigh_normalized_laplacian_p3():
    # path 0-1-2: smallest eigenvalue 0 with eigenvector ~ D^(1/2) 1
    A = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
    d = A.sum(axis=1)
    Dm = np.diag(1 / np.sqrt(d))
    L = np.eye(3) - Dm @ A @ Dm
    w, V = symmetric_eigh(L)
    assert abs(w[0]) < 1e-10
    u = np.sqrt(d)
    u = u / np.linalg.norm(u)
    assert abs(abs(V[:, 0] @ u) - 1.0) < 1e-8


def test_eigh_rejects_asymmetric():
    with pytest.raises(ContractError):
        symmetric_eigh(np.array([[0.0, 1.0], [0.5, 0.0]]))


# -- checkpoints --------------------------------------------------------------------------

def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(14)
    arrays = {
        "enc/w": rng.normal(size=(3, 4, 4)).astype(np.float32),
        "dec/b": rng.normal(size=(7,)).astype(np.float32),
        "meta/step": np.array(123.0, dtype=np.float32),
    }
    path = tmp_path / "ck.mind"
    save_checkpoint(str(path), arrays)
    assert path.read_bytes()[:4] == b"MIND"
    back = load_checkpoint(str(path))
    assert set(back) == set(arrays)
    for k in arrays:
        assert np.array_equal(back[k], arrays[k])


def test_checkpoint_deterministic_bytes(tmp_path):
    arrays = {"b": np.ones(2, np.float32), "a": np.zeros(3, np.float32)}
    p1, p2 = tmp_path / "1.mind", tmp_path / "2.mind"
    save_checkpoint(str(p1), arrays)
    save_checkpoint(str(p2), dict(reversed(list(arrays.items()))))
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_validation(tmp_path):
    path = tmp_path / "ck.mind"
    save_checkpoint(str(path), {"w": np.zeros((2, 2), np.float32)})
    back = load_checkpoint(str(path))
    validate_shapes(back, {"w": (2, 2)})
    with pytest.raises(ContractError):
        validate_shapes(back, {"w": (2, 3)})
    with pytest.raises(ContractError):
        validate_shapes(back, {"w": (2, 2), "missing": (1,)})
    with pytest.raises(ParseError):
        bad = tmp_path / "bad.mind"
        bad.write_bytes(b"NOPE" + b"\x00" * 8)
        load_checkpoint(str(bad))
