import numpy as np
import pytest
from hypothesis import given, strategies as st

from wrnn import numerics
from wrnn.errors import ShapeError
from wrnn.lstm import LstmParams, cell_backward, cell_forward, unroll_backward, unroll_forward


def _random(rng, H=3, D=2, scale=0.8):
    p = LstmParams.init(H, D, rng)
    return LstmParams(*[getattr(p, n) + rng.normal(0, scale, getattr(p, n).shape)
                        for n in ("W_f", "W_g", "W_c", "W_o", "b_f", "b_g", "b_c", "b_o")])


def test_zero_params_tanh():
    p = LstmParams.zeros(4, 3)
    h, s, c = cell_forward(np.array([1.0, -2.0, 3.0]), np.zeros(4), np.zeros(4), p)
    assert np.all(c.f == 0.5) and np.all(c.g == 0.5) and np.all(c.o == 0.5)
    assert np.all(c.c == 0) and np.all(s == 0) and np.all(h == 0)


def test_zero_params_sigmoid_candidate():
    p = LstmParams.zeros(2, 2)
    h, s, c = cell_forward(np.array([0.3, 0.1]), np.zeros(2), np.zeros(2), p, "sigmoid")
    assert np.all(c.c == 0.5) and np.all(s == 0.25)
    np.testing.assert_allclose(h, 0.5 * np.tanh(0.25), rtol=0, atol=1e-15)
    assert abs(h[0] - 0.12246) < 1e-5


def test_saturated_forget_gate_passes_state():
    p = LstmParams.zeros(2, 2)
    p.b_f[:] = 100.0
    h, s, _ = cell_forward(np.zeros(2), np.zeros(2), np.full(2, 2.0), p)
    np.testing.assert_allclose(s, 2.0, atol=1e-12)
    assert abs(h[0] - 0.48201) < 1e-5


def test_cell_backward_zero_gradients(rng):
    p = _random(rng)
    _, _, c = cell_forward(rng.normal(size=2), rng.normal(size=3), rng.normal(size=3), p)
    dx, dh, ds, dp = cell_backward(np.zeros(3), np.zeros(3), c, p)
    assert not dx.any() and not dh.any() and not ds.any()
    assert all(not a.any() for a in dp.as_dict().values())


def test_cell_backward_vs_fd(rng):
    for cand in ("tanh", "sigmoid"):
        p = _random(rng)
        x, h0, s0 = rng.normal(size=2), rng.normal(size=3), rng.normal(size=3)
        ch, cs = rng.normal(size=3), rng.normal(size=3)

        def loss(_=None):
            h, s, _c = cell_forward(x, h0, s0, p, cand)
            return float(ch @ h + cs @ s)

        _, _, c = cell_forward(x, h0, s0, p, cand)
        dx, dh, ds, dp = cell_backward(ch, cs, c, p)
        for a, arr in [(dx, x), (dh, h0), (ds, s0)] + [(getattr(dp, n), v) for n, v in p.as_dict().items()]:
            assert numerics.relative_error(a, numerics.finite_diff_grad(loss, arr)) < 1e-5


def test_closed_forget_gate_blocks_state_gradient(rng):
    p = _random(rng)
    p.b_f[:] = -100.0
    _, _, c = cell_forward(rng.normal(size=2), rng.normal(size=3), rng.normal(size=3), p)
    _, _, ds, _ = cell_backward(rng.normal(size=3), rng.normal(size=3), c, p)
    assert np.all(np.abs(ds) < 1e-30)


def test_cell_backward_rejects_mismatched_cache(rng):
    _, _, c = cell_forward(np.zeros(2), np.zeros(3), np.zeros(3), _random(rng))
    with pytest.raises(ShapeError):
        cell_backward(np.zeros(4), np.zeros(4), c, _random(rng, H=4))


def test_unroll_single_step_equals_cell(rng):
    p = _random(rng)
    x = rng.normal(size=2)
    H, _ = unroll_forward(x[None, :], p)
    h, _, _ = cell_forward(x, np.zeros(3), np.zeros(3), p)
    assert np.array_equal(H[0], h)


def test_unroll_zero_params():
    H, _ = unroll_forward(np.ones((5, 2)), LstmParams.zeros(3, 2))
    assert not H.any()


def test_reverse_on_palindrome_matches_forward(rng):
    p = _random(rng)
    half = rng.normal(size=(3, 2))
    X = np.concatenate([half, half[-2::-1]])      # 5 rows, palindromic
    Hf, _ = unroll_forward(X, p, "forward")
    Hb, _ = unroll_forward(X, p, "reverse")
    # reverse reads positions 4,3,..,0 = the same inputs as forward reads 0..4
    np.testing.assert_allclose(Hb[::-1], Hf, atol=1e-15)
    np.testing.assert_allclose(Hb[0], Hf[-1], atol=1e-15)


def test_unroll_shape_errors(rng):
    p = _random(rng)
    with pytest.raises(ShapeError):
        unroll_forward(np.zeros((4, 5)), p)
    with pytest.raises(ShapeError):
        unroll_forward(np.zeros((4, 2)), p, h0=np.zeros(7))
    _, cache = unroll_forward(np.zeros((4, 2)), p)
    with pytest.raises(ShapeError):
        unroll_backward(np.zeros((3, 3)), cache, p)


def test_unroll_backward_zero(rng):
    p = _random(rng)
    H, cache = unroll_forward(rng.normal(size=(4, 2)), p)
    dX, dp = unroll_backward(np.zeros_like(H), cache, p)
    assert not dX.any() and all(not a.any() for a in dp.as_dict().values())


@pytest.mark.parametrize("direction", ["forward", "reverse"])
@pytest.mark.parametrize("cand", ["tanh", "sigmoid"])
def test_bptt_vs_fd(rng, direction, cand):
    p = _random(rng)
    X = rng.normal(size=(4, 2))

    def loss(_=None):
        H, _c = unroll_forward(X, p, direction, candidate=cand)
        return 0.5 * float(np.sum(H * H))

    H, cache = unroll_forward(X, p, direction, candidate=cand)
    dX, dp = unroll_backward(H, cache, p)
    assert numerics.relative_error(dX, numerics.finite_diff_grad(loss, X)) < 1e-5
    for name, arr in p.as_dict().items():
        assert numerics.relative_error(getattr(dp, name), numerics.finite_diff_grad(loss, arr)) < 1e-5


def test_time_summation_order_is_immaterial(rng):
    """Per-step parameter gradients summed forwards and backwards agree to 1e-12."""
    p = _random(rng)
    X = rng.normal(size=(6, 2))
    H, cache = unroll_forward(X, p)
    dH = rng.normal(size=H.shape)
    _, total = unroll_backward(dH, cache, p)
    # recover the per-step contributions from single-step backward calls
    steps = []
    dh_next, ds_next = np.zeros(3), np.zeros(3)
    for t in range(5, -1, -1):
        dx, dh_next, ds_next, dp = cell_backward(dH[t] + dh_next, ds_next, cache.step(t), p)
        steps.append(dp.W_f)
    np.testing.assert_allclose(sum(steps), total.W_f, atol=1e-12)
    np.testing.assert_allclose(sum(steps[::-1]), total.W_f, atol=1e-12)


def test_batched_unroll_matches_rows(rng):
    p = _random(rng)
    X = rng.normal(size=(3, 5, 2))
    H, _ = unroll_forward(X, p)
    for b in range(3):
        np.testing.assert_allclose(H[b], unroll_forward(X[b], p)[0], atol=1e-15)


@given(st.integers(0, 10_000), st.sampled_from([1.0, 3.0]))
def test_gate_ranges_and_state_bound(seed, scale):
    rng = np.random.Generator(np.random.PCG64(seed))
    p = _random(rng, scale=scale)
    X = rng.normal(0, scale, size=(5, 2))
    H, cache = unroll_forward(X, p)
    g = cache.gates[0]
    Hn = p.hidden
    for k in (0, 1, 3):                         # f, g, o blocks
        blk = g[:, k * Hn:(k + 1) * Hn]
        if scale == 1.0:
            assert np.all((blk > 0) & (blk < 1))
        else:
            # in float64 sigmoid saturates to exactly 0 or 1 past |z| ~ 37
            assert np.all((blk >= 0) & (blk <= 1))
    assert np.all(np.abs(H) <= 1)
    if scale == 1.0:
        assert np.all(np.abs(H) < 1)
    S = cache.S[0]
    prev = np.zeros(Hn)
    for t in range(5):
        assert np.all(np.abs(S[t]) <= np.abs(prev) + 1)
        prev = S[t]


def test_deterministic(rng):
    p = _random(rng)
    X = rng.normal(size=(4, 6, 2))
    a, _ = unroll_forward(X, p)
    b, _ = unroll_forward(X, p)
    assert a.tobytes() == b.tobytes()
