import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synscaffold import tensorcore as tc


def param(values):
    return tc.Tensor(np.array(values, dtype=float), requires_grad=True)


def grads_of(build, *params):
    with tc.Tape() as tape:
        loss = build()
    g = tc.backward(tape, loss)
    return [g.get(p, np.zeros_like(p.data)) for p in params]


def test_product_rule():
    x, y = param(2.0), param(3.0)
    gx, gy = grads_of(lambda: x * y, x, y)
    assert gx == 3.0 and gy == 2.0


def test_logsumexp_gradient_is_softmax():
    z = param([0.3, -1.2, 2.0, 0.0])
    (g,) = grads_of(lambda: tc.logsumexp(z), z)
    e = np.exp(z.data)
    np.testing.assert_allclose(g, e / e.sum(), rtol=1e-12)


def test_non_scalar_loss_rejected():
    x = param([1.0, 2.0])
    with tc.Tape() as tape:
        y = x * 2.0
    with pytest.raises(ValueError):
        tc.backward(tape, y)


def test_non_finite_forward_names_op():
    x = param([1e308])
    with tc.Tape(), np.errstate(over="ignore"):
        with pytest.raises(FloatingPointError, match="mul"):
            x * 10.0


def test_non_finite_gradient_names_op():
    x = param([1.0, 2.0])
    with tc.Tape() as tape:
        y = tc.tanh(x)
        loss = tc.tensor_sum(y)
    tape.nodes[-1]._backward = lambda g: (np.full(2, np.inf),)
    with pytest.raises(FloatingPointError, match="tanh"):
        tc.backward(tape, loss)


def test_parameters_not_on_path_get_no_gradient():
    x, y = param(1.0), param(1.0)
    with tc.Tape() as tape:
        loss = x * 3.0
    g = tc.backward(tape, loss)
    assert y not in g and x in g
    assert all(k.requires_grad and k._backward is None for k in g)


def test_two_layer_net_matches_finite_differences():
    rng = np.random.default_rng(0)
    w1, b1 = param(rng.normal(size=(4, 5))), param(rng.normal(size=5))
    w2 = param(rng.normal(size=(5, 3)))
    x = tc.Tensor(rng.normal(size=(2, 4)))

    def build():
        h = tc.tanh(tc.matmul(x, w1) + b1)
        return tc.logsumexp(tc.matmul(h, w2))

    analytic = grads_of(build, w1, b1, w2)
    for p, a in zip((w1, b1, w2), analytic):
        numeric = tc.numeric_gradient(lambda: build().item(), p.data)
        assert tc.relative_error(a, numeric) < 1e-4


PRIMITIVES = {
    "add": lambda a, b: tc.tensor_sum(a + b * b),
    "mul": lambda a, b: tc.tensor_sum(a * b),
    "matmul": lambda a, b: tc.tensor_sum(tc.matmul(tc.reshape(a, (2, 3)), tc.reshape(b, (3, 2)))),
    "tanh": lambda a, b: tc.tensor_sum(tc.tanh(a) * b),
    "sigmoid": lambda a, b: tc.tensor_sum(tc.sigmoid(a) * b),
    "relu": lambda a, b: tc.tensor_sum(tc.relu(a) * b),
    "softmax": lambda a, b: tc.tensor_sum(tc.softmax(a) * b),
    "masked_softmax": lambda a, b: tc.tensor_sum(
        tc.softmax(a, mask=np.array([1, 0, 1, 1, 0, 1], bool)) * b),
    "log_softmax": lambda a, b: tc.tensor_sum(tc.log_softmax(tc.reshape(a, (2, 3)), axis=1)
                                              * tc.reshape(b, (2, 3))),
    "logsumexp": lambda a, b: tc.logsumexp(a * b),
    "masked_logsumexp": lambda a, b: tc.tensor_sum(tc.logsumexp(
        tc.reshape(a * b, (2, 3)), axis=1, mask=np.array([[1, 0, 1], [0, 1, 1]], bool))),
    "concat": lambda a, b: tc.tensor_sum(tc.concat([a, b]) * tc.concat([b, a])),
    "stack": lambda a, b: tc.tensor_sum(tc.stack([a, b]) * tc.stack([b, b])),
    "slice": lambda a, b: tc.tensor_sum(a[1:4] * b[2:5]),
    "take": lambda a, b: tc.tensor_sum(tc.take(a, [0, 2, 2, 5]) * tc.take(b, [1, 1, 3, 0])),
    "sum_axis": lambda a, b: tc.tensor_sum(tc.tensor_sum(tc.reshape(a, (2, 3)), axis=0) * b[:3]),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVES))
def test_primitive_gradients_at_random_points(name):
    rng = np.random.default_rng(abs(hash(name)) % 2**32)
    fn = PRIMITIVES[name]
    for _ in range(20):
        a, b = param(rng.normal(size=6)), param(rng.normal(size=6))
        if name == "relu":
            a.data[np.abs(a.data) < 1e-3] = 0.5  # keep away from the kink
        ga, gb = grads_of(lambda: fn(a, b), a, b)
        for p, g in ((a, ga), (b, gb)):
            numeric = tc.numeric_gradient(lambda: fn(a, b).item(), p.data)
            assert tc.relative_error(g, numeric) < 1e-4, name


def test_dropout_fixed_mask_gradient():
    a = param(np.arange(1.0, 7.0))
    rng = np.random.default_rng(3)
    with tc.Tape() as tape:
        y = tc.dropout(a, 0.5, rng, training=True)
        loss = tc.tensor_sum(y)
    g = tc.backward(tape, loss)[a]
    np.testing.assert_array_equal(g, y.data / a.data)


def test_dropout_rate_and_scaling():
    rng = np.random.default_rng(0)
    x = tc.Tensor(np.ones(200_000))
    y = tc.dropout(x, 0.3, rng, training=True).data
    assert abs((y == 0).mean() - 0.3) < 0.01
    np.testing.assert_allclose(y[y != 0], 1 / 0.7)
    assert tc.dropout(x, 0.3, rng, training=False) is x


def test_backward_is_deterministic():
    rng = np.random.default_rng(5)
    w = param(rng.normal(size=(3, 3)))

    def run():
        r = np.random.default_rng(11)
        with tc.Tape() as tape:
            h = tc.dropout(tc.tanh(tc.matmul(tc.Tensor(np.ones((2, 3))), w)), 0.5, r, True)
            loss = tc.logsumexp(h)
        return tc.backward(tape, loss)[w]

    np.testing.assert_array_equal(run(), run())


def test_backward_visits_each_node_once():
    x = param(1.5)
    with tc.Tape() as tape:
        y = x * x
        z = y + y
        loss = z * z
    calls = []
    for node in tape.nodes:
        original = node._backward
        node._backward = (lambda f, n: lambda g: (calls.append(n), f(g))[1])(original, node)
    g = tc.backward(tape, loss)[x]
    assert len(calls) == len(set(map(id, calls))) == len(tape.nodes)
    assert g == pytest.approx(16 * 1.5 ** 3)


def test_no_tape_means_no_recording():
    x = param(2.0)
    y = x * x
    assert not y.requires_grad and y._backward is None


def test_clip_below_threshold_unchanged():
    g = {"a": np.array([0.3, 0.4])}
    assert tc.clip_global_norm(g, 1.0)["a"] is g["a"]


def test_clip_scales():
    out = tc.clip_global_norm({"a": np.array([3.0, 4.0])}, 1.0)
    np.testing.assert_allclose(out["a"], [0.6, 0.8])


def test_clip_empty_is_noop():
    assert tc.clip_global_norm({}, 1.0) == {}


def test_clip_random_sets():
    rng = np.random.default_rng(1)
    for _ in range(100):
        grads = {str(k): rng.normal(scale=rng.uniform(0.01, 5), size=rng.integers(1, 6))
                 for k in range(rng.integers(1, 5))}
        out = tc.clip_global_norm(grads, 1.0)
        norm = np.sqrt(sum((g ** 2).sum() for g in out.values()))
        assert norm <= 1.0 + 1e-12


def test_adam_first_step():
    p = {"w": param(0.0)}
    tc.adam_step(p, {"w": np.array(1.0)}, tc.AdamState(lr=0.001))
    assert p["w"].data == pytest.approx(-0.001, rel=1e-6)


def test_adam_zero_gradient_keeps_parameter():
    p = {"w": param([1.0, -2.0])}
    state = tc.AdamState()
    tc.adam_step(p, {"w": np.array([0.5, 0.5])}, state)
    before = p["w"].data.copy()
    m_before = state.m["w"].copy()
    tc.adam_step(p, {"w": np.zeros(2)}, state)
    np.testing.assert_allclose(state.m["w"], 0.9 * m_before)
    # the update is driven only by the decayed moments
    assert np.all(np.abs(p["w"].data - before) <= 0.001 + 1e-12)
    assert state.step == 2


def test_adam_zero_gradient_from_fresh_state():
    p = {"w": param([1.0, -2.0])}
    state = tc.AdamState()
    tc.adam_step(p, {"w": np.zeros(2)}, state)
    np.testing.assert_array_equal(p["w"].data, [1.0, -2.0])
    np.testing.assert_array_equal(state.v["w"], 0.0)


def test_adam_shape_mismatch():
    with pytest.raises(ValueError):
        tc.adam_step({"w": param([1.0, 2.0])}, {"w": np.zeros(3)}, tc.AdamState())


def test_adam_converges_on_quadratic():
    p = {"w": param(0.0)}
    state = tc.AdamState(lr=0.001)
    for _ in range(10_000):
        with tc.Tape() as tape:
            d = p["w"] - 3.0
            loss = d * d
        g = tc.backward(tape, loss)
        tc.adam_step(p, {"w": g[p["w"]]}, state)
    assert abs(p["w"].item() - 3.0) < 0.01


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(2)
    params = {"a": rng.normal(size=(3, 4)), "b.c": np.array([np.pi, -0.0, 1e-300])}
    path = tmp_path / "ckpt.npz"
    tc.save_checkpoint(path, params, {"hello": [1, 2]})
    loaded, meta = tc.load_checkpoint(path)
    assert meta == {"hello": [1, 2]}
    for k, v in params.items():
        assert loaded[k].tobytes() == v.astype("<f8").tobytes()


def test_checkpoint_version_mismatch(tmp_path):
    path = tmp_path / "bad.npz"
    with open(path, "wb") as f:
        np.savez(f, __version__=np.frombuffer(b"other/9", dtype=np.uint8))
    with pytest.raises(ValueError, match="version"):
        tc.load_checkpoint(path)


def test_glorot_bounds():
    rng = np.random.default_rng(0)
    w = tc.glorot_uniform(rng, (30, 20))
    assert np.abs(w).max() <= np.sqrt(6 / 50)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=8))
def test_softmax_sums_to_one(values):
    p = tc.softmax(tc.Tensor(values)).data
    assert abs(p.sum() - 1.0) < 1e-12
