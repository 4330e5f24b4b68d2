import math

import numpy as np
import pytest

from frameid import numerics as nx
from frameid.errors import CheckpointError, ContractError
from frameid.model import (
    LITERAL,
    MASKED,
    NO_FILTER,
    EncoderConfig,
    ModelParams,
    attend,
    attentional_state,
    checkpoint_bytes,
    choose,
    encode,
    forward,
    forward_batch,
    frame_distribution,
    load_checkpoint,
    parse_checkpoint,
    predict,
    save_checkpoint,
    target_vector,
)
from frameid.tokenizer import TokenizedInstance

SMALL = EncoderConfig(layers=1, d=8, heads=2, ffn_dim=16, vocab_size=30, n=12, seed=3)


def random_ids(rng, config, length=8):
    ids = np.zeros(config.n, dtype=np.int64)
    ids[0] = 2
    ids[1:length - 1] = rng.integers(4, config.vocab_size, size=length - 2)
    ids[length - 1] = 3
    return ids


def oracle_attend(H, t, b1, b2):
    n, d = H.shape
    scores = [sum(H[i, m] * t[m] for m in range(d)) for i in range(n)]
    window = range(b1 - 1, b2)
    top = max(scores[i] for i in window)
    exps = {i: math.exp(scores[i] - top) for i in window}
    total = sum(exps.values())
    alpha = [exps[i] / total if i in exps else 0.0 for i in range(n)]
    c = [sum(alpha[i] * H[i, m] for i in range(n)) for m in range(d)]
    return np.array(c), np.array(alpha)


class TestConfig:
    def test_defaults(self):
        c = EncoderConfig()
        assert (c.layers, c.d, c.heads, c.ffn_dim, c.n) == (2, 32, 4, 64, 64)

    @pytest.mark.parametrize("kw", [dict(d=10, heads=4), dict(layers=0), dict(dropout=1.0), dict(n=0)])
    def test_invalid(self, kw):
        with pytest.raises(ContractError):
            EncoderConfig(**kw)


class TestEncode:
    def test_shape(self, rng):
        params = ModelParams(SMALL, 5)
        assert encode(params, SMALL, random_ids(rng, SMALL)).shape == (12, 8)
        batch = np.stack([random_ids(rng, SMALL), random_ids(rng, SMALL)])
        assert encode(params, SMALL, batch).shape == (2, 12, 8)

    def test_position_change_propagates(self, rng):
        params = ModelParams(SMALL, 5)
        for _ in range(5):
            a = random_ids(rng, SMALL)
            b = a.copy()
            j = int(rng.integers(1, 7))
            b[j] = 4 + (a[j] - 4 + 1) % (SMALL.vocab_size - 4)
            Ha, Hb = encode(params, SMALL, a).data, encode(params, SMALL, b).data
            # self-attention mixes positions, so rows other than j change too
            others = [i for i in range(8) if i != j]
            assert not np.allclose(Ha[others], Hb[others])

    def test_zero_weights_finite(self, rng):
        params = ModelParams(SMALL, 5)
        for p in params:
            p.data[:] = 0.0
        H = encode(params, SMALL, random_ids(rng, SMALL)).data
        assert np.isfinite(H).all()

    def test_id_out_of_range(self):
        params = ModelParams(SMALL, 5)
        ids = np.zeros(12, dtype=np.int64)
        ids[0] = 30
        with pytest.raises(ContractError):
            encode(params, SMALL, ids)

    def test_wrong_length(self):
        with pytest.raises(ContractError):
            encode(ModelParams(SMALL, 5), SMALL, np.zeros(5, dtype=np.int64))

    def test_padding_does_not_leak(self, rng):
        params = ModelParams(SMALL, 5)
        ids = random_ids(rng, SMALL, length=6)
        H = encode(params, SMALL, ids).data
        ids2 = ids.copy()
        ids2[6:] = 0
        ids2[8] = 0
        np.testing.assert_allclose(encode(params, SMALL, ids2).data[:6], H[:6])


class TestTargetVector:
    def test_one_hot(self, rng):
        H = rng.normal(size=(6, 4))
        p = np.zeros(6)
        p[2] = 1
        np.testing.assert_array_equal(target_vector(H, p).data, H[2])

    def test_two_positions(self, rng):
        H = rng.normal(size=(6, 4))
        p = np.zeros(6)
        p[[1, 4]] = 1
        expected = [H[1, m] + H[4, m] for m in range(4)]
        np.testing.assert_allclose(target_vector(H, p).data, expected, atol=1e-12)

    def test_linearity(self, rng):
        r = rng.normal(size=4)
        H = np.stack([r, r, r])
        np.testing.assert_allclose(target_vector(H, np.ones(3)).data, 3 * r, atol=1e-15)

    def test_empty(self):
        with pytest.raises(ContractError):
            target_vector(np.ones((3, 2)), np.zeros(3))


class TestAttend:
    def test_identical_rows(self, rng):
        row = rng.normal(size=4)
        H = np.tile(row, (7, 1))
        c, alpha = attend(H, rng.normal(size=4), 2, 5)
        np.testing.assert_allclose(alpha.data[1:5], 0.25, atol=1e-15)
        assert not alpha.data[[0, 5, 6]].any()
        np.testing.assert_allclose(c.data, row, atol=1e-14)

    def test_fixture_against_oracle(self):
        H = np.array([[0.5, -1.0], [1.5, 0.25], [-0.75, 2.0], [0.1, 0.3]])
        t = np.array([0.8, -0.4])
        c, alpha = attend(H, t, 2, 4)
        c_ref, alpha_ref = oracle_attend(H, t, 2, 4)
        np.testing.assert_allclose(alpha.data, alpha_ref, rtol=0, atol=1e-10)
        np.testing.assert_allclose(c.data, c_ref, rtol=0, atol=1e-10)

    def test_width_one(self, rng):
        H = rng.normal(size=(5, 3))
        c, alpha = attend(H, rng.normal(size=3), 3, 3)
        assert alpha.data.tolist() == [0, 0, 1.0, 0, 0]
        np.testing.assert_array_equal(c.data, H[2])

    def test_full_window_is_global(self, rng):
        H = rng.normal(size=(6, 3))
        t = rng.normal(size=3)
        _, alpha = attend(H, t, 1, 6)
        logits = H @ t
        ref = np.exp(logits - logits.max()) / np.exp(logits - logits.max()).sum()
        np.testing.assert_allclose(alpha.data, ref, atol=1e-12)

    def test_bad_window(self, rng):
        with pytest.raises(ContractError):
            attend(rng.normal(size=(4, 2)), np.ones(2), 3, 2)


class TestAttentionalState:
    def test_zero_weights(self, rng):
        W = nx.Parameter(np.zeros((4, 8)), "W_c")
        assert not attentional_state(rng.normal(size=4), rng.normal(size=4), W).data.any()

    def test_identity_block(self, rng):
        W = nx.Parameter(np.hstack([np.eye(4), np.zeros((4, 4))]), "W_c")
        c = rng.normal(size=4)
        np.testing.assert_allclose(attentional_state(c, rng.normal(size=4), W).data, np.tanh(c), atol=1e-15)

    def test_random_against_oracle(self, rng):
        W = nx.Parameter(rng.normal(size=(4, 8)), "W_c")
        c, t = rng.normal(size=4), rng.normal(size=4)
        joined = list(c) + list(t)
        ref = [math.tanh(sum(W.data[i, j] * joined[j] for j in range(8))) for i in range(4)]
        np.testing.assert_allclose(attentional_state(c, t, W).data, ref, rtol=0, atol=1e-12)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ContractError):
            attentional_state(np.ones(4), np.ones(3), nx.Parameter(np.ones((4, 8)), "W"))


def _softmax(z):
    e = np.exp(z - z.max())
    return e / e.sum()


class TestPredict:
    @pytest.fixture
    def params(self):
        return ModelParams(SMALL, 6)

    def test_single_candidate(self, params, rng):
        v = np.zeros(6, dtype=np.int8)
        v[4] = 1
        pred = predict(np.tanh(rng.normal(size=8)), params, v, MASKED)
        assert pred.y[4] == 1.0
        assert pred.y.sum() == 1.0
        assert pred.predicted == 4

    def test_vacuous_mask(self, params, rng):
        h = np.tanh(rng.normal(size=8))
        pred = predict(h, params, np.ones(6, dtype=np.int8), MASKED)
        ref = _softmax(params["head.W_o"].data @ (params["head.W_k"].data @ h))
        np.testing.assert_allclose(pred.y, ref, atol=1e-12)

    def test_no_filter(self, params, rng):
        h = np.tanh(rng.normal(size=8))
        pred = predict(h, params, None, NO_FILTER)
        np.testing.assert_allclose(pred.y, _softmax(params["head.W_s"].data @ h), atol=1e-12)
        assert pred.v.sum() == 6

    def test_literal_matches_multiply_then_softmax(self, params, rng):
        h = np.tanh(rng.normal(size=8))
        v = np.array([1, 0, 1, 0, 0, 1], dtype=np.int8)
        pred = predict(h, params, v, LITERAL)
        o = (params["head.W_k"].data @ h) * v
        np.testing.assert_allclose(pred.y, _softmax(params["head.W_o"].data @ o), rtol=0, atol=1e-10)
        assert (pred.y[v == 0] > 0).all()
        assert v[pred.predicted] == 1

    def test_masked_zero_outside(self, params, rng):
        v = np.array([1, 0, 1, 0, 0, 1], dtype=np.int8)
        pred = predict(np.tanh(rng.normal(size=8)), params, v, MASKED)
        assert (pred.y[v == 0] == 0).all()
        assert abs(pred.y.sum() - 1) < 1e-12

    @pytest.mark.parametrize("mode", [MASKED, LITERAL])
    def test_empty_mask(self, params, mode):
        with pytest.raises(ContractError):
            predict(np.zeros(8), params, np.zeros(6, dtype=np.int8), mode)

    def test_tie_break_lowest_id(self):
        y = np.array([0.1, 0.4, 0.1, 0.4])
        assert choose(y, np.ones(4), NO_FILTER) == 1
        assert choose(y, np.array([1, 0, 1, 1]), MASKED) == 3
        assert choose(np.array([0.2, 0.3, 0.2, 0.3]), np.array([1, 0, 1, 0]), LITERAL) == 0

    def test_argmax_shift_invariant(self, params, rng):
        for _ in range(20):
            h = nx.Tensor(np.tanh(rng.normal(size=8)))
            v = (rng.random(6) < 0.5).astype(np.int8)
            v[rng.integers(6)] = 1
            logits = params["head.W_o"].data @ ((params["head.W_k"].data @ h.data) * v)
            shift = rng.normal() * 10
            a = nx.masked_softmax(logits, v.astype(bool)).data
            b = nx.masked_softmax(logits + shift, v.astype(bool)).data
            assert choose(a, v, MASKED) == choose(b, v, MASKED)
            assert choose(frame_distribution(h, params, v, MASKED).data, v, MASKED) == choose(a, v, MASKED)


def make_instance(rng, config, target_positions, w):
    ids = random_ids(rng, config, length=10)
    p = np.zeros(config.n, dtype=np.int8)
    p[[i - 1 for i in target_positions]] = 1
    start, end = min(target_positions), max(target_positions)
    window = (max(start - w, 1), min(end + w, config.n))
    return TokenizedInstance(ids, (), p, start, end, window)


class TestForward:
    def test_deterministic(self, rng):
        params = ModelParams(SMALL, 6)
        inst = make_instance(rng, SMALL, [3], 2)
        a = forward(params, SMALL, inst, None, NO_FILTER)
        b = forward(params, SMALL, inst, None, NO_FILTER)
        assert a.y.tobytes() == b.y.tobytes()
        assert a.alpha.tobytes() == b.alpha.tobytes()

    @pytest.mark.parametrize("mode", [NO_FILTER, MASKED, LITERAL])
    def test_probability_contract(self, rng, mode):
        params = ModelParams(SMALL, 6)
        for _ in range(10):
            pos = sorted(rng.choice(np.arange(2, 9), size=rng.integers(1, 3), replace=False).tolist())
            inst = make_instance(rng, SMALL, pos, int(rng.integers(0, 5)))
            v = (rng.random(6) < 0.5).astype(np.int8)
            v[rng.integers(6)] = 1
            pred = forward(params, SMALL, inst, v, mode)
            assert (pred.y >= 0).all()
            assert abs(pred.y.sum() - 1) < 1e-6
            if mode == MASKED:
                assert (pred.y[v == 0] == 0).all()
            b1, b2 = inst.window
            outside = np.ones(SMALL.n, dtype=bool)
            outside[b1 - 1:b2] = False
            assert (pred.alpha[outside] == 0).all()

    def test_position_sensitivity(self, rng):
        params = ModelParams(SMALL, 6)
        ids = random_ids(rng, SMALL, length=10)
        ids[3] = ids[6] = 7  # same token at two positions
        H = encode(params, SMALL, ids)
        p1 = np.zeros(SMALL.n)
        p1[3] = 1
        p2 = np.zeros(SMALL.n)
        p2[6] = 1
        t1, t2 = target_vector(H, p1).data, target_vector(H, p2).data
        assert not np.allclose(H.data[3], H.data[6])
        assert not np.allclose(t1, t2)

    def test_window_covering_everything_is_global(self, rng):
        params = ModelParams(SMALL, 6)
        inst = make_instance(rng, SMALL, [4], SMALL.n)
        assert inst.window == (1, SMALL.n)
        pred = forward(params, SMALL, inst, None, NO_FILTER)
        H = encode(params, SMALL, inst.token_ids).data
        logits = H @ H[3]
        ref = np.exp(logits - logits.max())
        np.testing.assert_allclose(pred.alpha, ref / ref.sum(), atol=1e-10)

    @pytest.mark.parametrize("mode", [NO_FILTER, MASKED, LITERAL])
    def test_end_to_end_gradient(self, rng, mode):
        params = ModelParams(SMALL, 5)
        ids = np.stack([random_ids(rng, SMALL, 9), random_ids(rng, SMALL, 7)])
        p = np.zeros((2, SMALL.n), dtype=np.int8)
        p[0, [2, 3]] = 1
        p[1, 4] = 1
        v = np.array([[1, 1, 0, 1, 0], [0, 1, 1, 0, 1]], dtype=np.int8)

        def loss():
            y, _ = forward_batch(params, SMALL, ids, p, np.array([1, 2]), np.array([6, 8]), v, mode)
            return nx.nll(y, [3, 2])

        assert nx.grad_check(loss, list(params)) < 1e-4


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        params = ModelParams(SMALL, 4)
        path = tmp_path / "m.ckpt"
        frames = ["A", "B", "C", "D"]
        vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"] + [f"t{i}" for i in range(26)]
        save_checkpoint(path, params, frames, vocab, {"note": 1})
        ckpt = load_checkpoint(path)
        assert ckpt.frames == frames and ckpt.vocab == vocab and ckpt.extra == {"note": 1}
        assert ckpt.config == SMALL
        for name, p in params.params.items():
            assert ckpt.params[name].data.tobytes() == p.data.tobytes()
        assert checkpoint_bytes(ckpt.params, frames, vocab, {"note": 1}) == path.read_bytes()

    def test_corrupt_payload(self, tmp_path):
        data = bytearray(checkpoint_bytes(ModelParams(SMALL, 2), ["A", "B"], ["x"]))
        data[-5] ^= 0xFF
        with pytest.raises(CheckpointError, match="hash"):
            parse_checkpoint(bytes(data))

    def test_wrong_version(self):
        data = checkpoint_bytes(ModelParams(SMALL, 2), ["A", "B"], ["x"])
        with pytest.raises(CheckpointError, match="version"):
            parse_checkpoint(data.replace(b"FRAMEID-CHECKPOINT 1", b"FRAMEID-CHECKPOINT 9", 1))

    def test_garbage(self):
        with pytest.raises(CheckpointError):
            parse_checkpoint(b"hello world")

    def test_float32_precision(self, tmp_path):
        config = EncoderConfig(layers=1, d=4, heads=1, ffn_dim=4, vocab_size=10, n=6, precision="float32")
        params = ModelParams(config, 2)
        assert params["head.W_c"].data.dtype == np.float32
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, params, ["A", "B"], ["x"])
        assert load_checkpoint(path).params["head.W_c"].data.dtype == np.float32


def analytic_count(config, k):
    d, f, V, n, L = config.d, config.ffn_dim, config.vocab_size, config.n, config.layers
    embeddings = V * d + n * d + 2 * d + 2 * d
    layer = 4 * (d * d + d) + 2 * d + (f * d + f) + (d * f + d) + 2 * d
    head = d * 2 * d + k * d + k * d + k * k
    return embeddings + L * layer + head


@pytest.mark.parametrize("config,k", [(SMALL, 5), (EncoderConfig(), 12), (EncoderConfig(layers=3, d=12, heads=3), 7)])
def test_parameter_count(config, k):
    assert ModelParams(config, k).count() == analytic_count(config, k)


def test_initialization_seeded():
    a, b = ModelParams(SMALL, 3), ModelParams(SMALL, 3)
    for pa, pb in zip(a, b):
        assert pa.data.tobytes() == pb.data.tobytes()
    w = a["head.W_s"].data
    assert np.abs(w).max() <= 1 / math.sqrt(SMALL.d)
