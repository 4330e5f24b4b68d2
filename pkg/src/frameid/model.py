"""Toy transformer encoder with a positional windowed-attention frame classifier.

The head pools encoder states around the marked target: the target vector is
the sum of the target's hidden states, alignment scores are a softmax of
dot products with it restricted to a window around the target, and the
context vector and target vector are combined through a tanh layer before
the frame classifier.
"""

import hashlib
import io
import json
from collections import OrderedDict
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import numerics as nx
from .errors import CheckpointError, ContractError

NO_FILTER = "none"
MASKED = "masked"
LITERAL = "literal"
FILTER_MODES = (NO_FILTER, MASKED, LITERAL)

CHECKPOINT_MAGIC = "FRAMEID-CHECKPOINT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class EncoderConfig:
    layers: int = 2
    d: int = 32
    heads: int = 4
    ffn_dim: int = 64
    vocab_size: int = 128
    n: int = 64
    dropout: float = 0.0
    seed: int = 0
    precision: str = "float64"

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ContractError("invalid encoder config: " + "; ".join(problems))

    def problems(self):
        out = []
        for name in ("layers", "d", "heads", "ffn_dim", "vocab_size", "n"):
            if getattr(self, name) < 1:
                out.append(f"{name} must be >= 1")
        if self.heads >= 1 and self.d % self.heads:
            out.append("d must be divisible by heads")
        if not 0.0 <= self.dropout < 1.0:
            out.append("dropout must be in [0, 1)")
        if self.precision not in ("float64", "float32"):
            out.append("precision must be float64 or float32")
        return out


# BERT-base dimensions, for reference; not a usable default at toy scale.
BERT_BASE = dict(layers=12, d=768, heads=12, ffn_dim=3072)


def parameter_shapes(config, k):
    """Ordered (name, shape) list defining the checkpoint layout."""
    d, f = config.d, config.ffn_dim
    shapes = [
        ("embeddings.token", (config.vocab_size, d)),
        ("embeddings.position", (config.n, d)),
        ("embeddings.segment", (2, d)),
        ("embeddings.norm.gamma", (d,)),
        ("embeddings.norm.beta", (d,)),
    ]
    for i in range(config.layers):
        pre = f"layer{i}."
        for proj in ("query", "key", "value", "output"):
            shapes += [(pre + f"attn.{proj}.weight", (d, d)), (pre + f"attn.{proj}.bias", (d,))]
        shapes += [
            (pre + "attn.norm.gamma", (d,)),
            (pre + "attn.norm.beta", (d,)),
            (pre + "ffn.in.weight", (f, d)),
            (pre + "ffn.in.bias", (f,)),
            (pre + "ffn.out.weight", (d, f)),
            (pre + "ffn.out.bias", (d,)),
            (pre + "ffn.norm.gamma", (d,)),
            (pre + "ffn.norm.beta", (d,)),
        ]
    shapes += [
        ("head.W_c", (d, 2 * d)),
        ("head.W_s", (k, d)),
        ("head.W_k", (k, d)),
        ("head.W_o", (k, k)),
    ]
    return shapes


class ModelParams:
    """Named parameters for an encoder config and a frame count ``k``.

    ``W_c`` combines context and target vectors, ``W_s`` is the unfiltered
    classifier, ``W_k`` is the fully-connected layer ahead of the candidate
    mask and ``W_o`` is the (k x k) softmax layer applied after it.
    """

    def __init__(self, config, k, tensors=None):
        if k < 1:
            raise ContractError("need at least one frame")
        self.config = config
        self.k = k
        dtype = np.dtype(config.precision)
        self.params = OrderedDict()
        rng = np.random.default_rng(config.seed)
        for name, shape in parameter_shapes(config, k):
            if tensors is not None:
                if name not in tensors:
                    raise CheckpointError(f"missing tensor {name}")
                value = np.asarray(tensors[name])
                if value.shape != shape:
                    raise CheckpointError(f"tensor {name} has shape {value.shape}, expected {shape}")
            else:
                value = _initial_value(name, shape, rng)
            self.params[name] = nx.Parameter(value.astype(dtype, copy=True), name)

    def __getitem__(self, name):
        return self.params[name]

    def __iter__(self):
        return iter(self.params.values())

    def __len__(self):
        return len(self.params)

    def count(self):
        return sum(p.data.size for p in self.params.values())

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def copy(self):
        return ModelParams(self.config, self.k, {n: p.data for n, p in self.params.items()})


def _initial_value(name, shape, rng):
    if name.endswith("gamma"):
        return np.ones(shape)
    if name.endswith("beta") or name.endswith("bias"):
        return np.zeros(shape)
    fan_in = shape[-1]
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _as_batch(token_ids):
    ids = np.asarray(token_ids)
    return ids[None, :] if ids.ndim == 1 else ids, ids.ndim == 1


def encode(params, config, token_ids, rng=None):
    """Run the post-norm encoder stack.

    ``token_ids`` is (n,) or (batch, n); the result is (n, d) or
    (batch, n, d).  Dropout is active only when ``rng`` is given.
    """
    ids, single = _as_batch(token_ids)
    if ids.shape[-1] != config.n:
        raise ContractError(f"expected sequences of length {config.n}, got {ids.shape[-1]}")
    if ids.min() < 0 or ids.max() >= config.vocab_size:
        raise ContractError(f"token id out of range [0, {config.vocab_size})")
    batch, n = ids.shape
    d, h = config.d, config.heads
    dh = d // h
    P = params.params
    rate = config.dropout

    x = nx.embedding(ids, P["embeddings.token"])
    x = nx.add(x, P["embeddings.position"])
    x = nx.add(x, nx.embedding(np.zeros(n, dtype=np.int64), P["embeddings.segment"]))
    x = nx.layer_norm(x, P["embeddings.norm.gamma"], P["embeddings.norm.beta"])
    x = nx.dropout(x, rate, rng)

    # PAD keys receive no attention
    key_mask = (ids != 0)[:, None, None, :]

    for i in range(config.layers):
        pre = f"layer{i}."

        def heads(t):
            return nx.transpose(nx.reshape(t, (batch, n, h, dh)), (0, 2, 1, 3))

        q = heads(nx.affine(x, P[pre + "attn.query.weight"], P[pre + "attn.query.bias"]))
        k = heads(nx.affine(x, P[pre + "attn.key.weight"], P[pre + "attn.key.bias"]))
        v = heads(nx.affine(x, P[pre + "attn.value.weight"], P[pre + "attn.value.bias"]))
        scores = nx.scale(nx.matmul(q, nx.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
        attn = nx.dropout(nx.masked_softmax(scores, key_mask), rate, rng)
        ctx = nx.reshape(nx.transpose(nx.matmul(attn, v), (0, 2, 1, 3)), (batch, n, d))
        out = nx.affine(ctx, P[pre + "attn.output.weight"], P[pre + "attn.output.bias"])
        x = nx.layer_norm(
            nx.add(x, nx.dropout(out, rate, rng)),
            P[pre + "attn.norm.gamma"],
            P[pre + "attn.norm.beta"],
        )
        ff = nx.gelu(nx.affine(x, P[pre + "ffn.in.weight"], P[pre + "ffn.in.bias"]))
        ff = nx.affine(ff, P[pre + "ffn.out.weight"], P[pre + "ffn.out.bias"])
        x = nx.layer_norm(
            nx.add(x, nx.dropout(ff, rate, rng)),
            P[pre + "ffn.norm.gamma"],
            P[pre + "ffn.norm.beta"],
        )

    return nx.reshape(x, (n, d)) if single else x


def target_vector(H, p):
    """Sum of the hidden states at target positions: ``H^T p``."""
    H = nx.as_tensor(H)
    p = np.asarray(p, dtype=H.data.dtype)
    if p.shape != H.shape[:-1]:
        raise ContractError(f"position vector shape {p.shape} does not match states {H.shape}")
    if not np.all(p.reshape(-1, p.shape[-1]).any(axis=-1)):
        raise ContractError("position vector marks no target position")
    t = nx.matmul(nx.Tensor(p[..., None, :]), H)
    return nx.reshape(t, H.shape[:-2] + (H.shape[-1],))


def window_mask(beta1, beta2, n):
    """Boolean mask of the 1-based inclusive window, broadcast over a batch."""
    beta1 = np.asarray(beta1)
    beta2 = np.asarray(beta2)
    if np.any(beta1 < 1) or np.any(beta2 > n) or np.any(beta1 > beta2):
        raise ContractError(f"need 1 <= beta1 <= beta2 <= {n}")
    pos = np.arange(1, n + 1)
    return (pos >= beta1[..., None]) & (pos <= beta2[..., None])


def attend(H, t, beta1, beta2):
    """Windowed dot-product attention of the target vector over ``H``.

    Returns ``(c, alpha)`` with alpha zero outside ``[beta1, beta2]`` and
    ``c = H^T alpha``.
    """
    H = nx.as_tensor(H)
    t = nx.as_tensor(t)
    n, d = H.shape[-2], H.shape[-1]
    lead = H.shape[:-2]
    scores = nx.reshape(nx.matmul(H, nx.reshape(t, lead + (d, 1))), lead + (n,))
    alpha = nx.masked_softmax(scores, window_mask(beta1, beta2, n))
    c = nx.reshape(nx.matmul(nx.reshape(alpha, lead + (1, n)), H), lead + (d,))
    return c, alpha


def attentional_state(c, t, W_c):
    """``tanh(W_c [c; t])``."""
    c, t = nx.as_tensor(c), nx.as_tensor(t)
    if c.shape != t.shape:
        raise ContractError(f"context {c.shape} and target {t.shape} vectors differ in shape")
    return nx.tanh(nx.affine(nx.concat([c, t], axis=-1), W_c))


def frame_distribution(h_tilde, params, v=None, filter_mode=MASKED):
    """Differentiable frame probabilities for one or many attentional states."""
    if filter_mode not in FILTER_MODES:
        raise ContractError(f"unknown filter mode {filter_mode!r}")
    P = params.params
    h_tilde = nx.as_tensor(h_tilde)
    if filter_mode == NO_FILTER:
        return nx.softmax(nx.affine(h_tilde, P["head.W_s"]))
    v = np.asarray(v)
    if v.shape[-1] != params.k:
        raise ContractError(f"candidate mask has {v.shape[-1]} entries, expected {params.k}")
    if not np.all(v.reshape(-1, params.k).any(axis=-1)):
        raise ContractError("candidate mask selects no frame")
    o = nx.mul(nx.affine(h_tilde, P["head.W_k"]), nx.Tensor(v.astype(h_tilde.data.dtype)))
    logits = nx.affine(o, P["head.W_o"])
    if filter_mode == LITERAL:
        return nx.softmax(logits)
    return nx.masked_softmax(logits, v.astype(bool))


@dataclass(eq=False)
class FramePrediction:
    y: np.ndarray
    predicted: int
    v: np.ndarray
    alpha: np.ndarray = None

    def top(self, count):
        """Frame ids ordered by probability, lowest id first among ties."""
        order = sorted(range(len(self.y)), key=lambda i: (-self.y[i], i))
        return order[:count]


def choose(y, v, filter_mode):
    """Argmax with lowest-id tie-break, restricted to candidates when filtering."""
    y = np.asarray(y)
    if filter_mode == NO_FILTER:
        return int(np.argmax(y))
    masked = np.where(np.asarray(v) > 0, y, -np.inf)
    return int(np.argmax(masked))


def predict(h_tilde, params, v=None, filter_mode=MASKED):
    if filter_mode == NO_FILTER or v is None:
        v = np.ones(params.k, dtype=np.int8)
    y = frame_distribution(h_tilde, params, v, filter_mode).data
    return FramePrediction(y=y, predicted=choose(y, v, filter_mode), v=np.asarray(v))


def forward_batch(params, config, token_ids, p, beta1, beta2, v, filter_mode, rng=None):
    """Batched forward pass; returns the (batch, k) probability Tensor and alpha."""
    P = params.params
    H = encode(params, config, token_ids, rng)
    t = target_vector(H, p)
    c, alpha = attend(H, t, beta1, beta2)
    h_tilde = attentional_state(c, t, P["head.W_c"])
    return frame_distribution(h_tilde, params, v, filter_mode), alpha


def forward(params, config, instance, v=None, filter_mode=MASKED):
    """Predict the frame for one tokenized instance (eval mode)."""
    if filter_mode == NO_FILTER or v is None:
        v = np.ones(params.k, dtype=np.int8)
    beta1, beta2 = instance.window
    y, alpha = forward_batch(
        params,
        config,
        instance.token_ids[None, :],
        instance.p[None, :],
        np.array([beta1]),
        np.array([beta2]),
        np.asarray(v)[None, :],
        filter_mode,
    )
    y = y.data[0]
    return FramePrediction(y=y, predicted=choose(y, v, filter_mode), v=np.asarray(v), alpha=alpha.data[0])


def vocab_hash_of(tokens):
    return hashlib.sha256(("\n".join(tokens) + "\n").encode("utf-8")).hexdigest()


def save_checkpoint(path, params, frames, vocab_tokens, extra=None):
    """Write a checkpoint.

    Layout: a magic/version line, a JSON header line (config, k, vocab hash,
    frame names, vocab tokens, extra metadata, payload digest), then for each
    tensor in declaration order a ``tensor <name> <dtype> <shape>`` line
    followed by its raw little-endian bytes.
    """
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(params, frames, vocab_tokens, extra))


def checkpoint_bytes(params, frames, vocab_tokens, extra=None):
    if len(frames) != params.k:
        raise ContractError(f"{len(frames)} frame names for k={params.k}")
    payload = io.BytesIO()
    for name, p in params.params.items():
        arr = np.ascontiguousarray(p.data, dtype=p.data.dtype.newbyteorder("<"))
        shape = "x".join(str(s) for s in arr.shape)
        payload.write(f"tensor {name} {arr.dtype.name} {shape}\n".encode("ascii"))
        payload.write(arr.tobytes())
    body = payload.getvalue()
    header = {
        "config": asdict(params.config),
        "k": params.k,
        "vocab_hash": vocab_hash_of(vocab_tokens),
        "frames": list(frames),
        "vocab": list(vocab_tokens),
        "extra": extra or {},
        "payload_sha256": hashlib.sha256(body).hexdigest(),
    }
    head = f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n" + json.dumps(header, sort_keys=True) + "\n"
    return head.encode("utf-8") + body


@dataclass
class Checkpoint:
    params: ModelParams
    frames: list
    vocab: list
    vocab_hash: str
    extra: dict

    @property
    def config(self):
        return self.params.config


def load_checkpoint(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc.strerror}") from None
    return parse_checkpoint(data)


def parse_checkpoint(data):
    try:
        magic_end = data.index(b"\n")
        magic = data[:magic_end].decode("ascii").split()
        header_end = data.index(b"\n", magic_end + 1)
        header = json.loads(data[magic_end + 1:header_end].decode("utf-8"))
    except (ValueError, UnicodeDecodeError):
        raise CheckpointError("not a frameid checkpoint (unreadable header)") from None
    if len(magic) != 2 or magic[0] != CHECKPOINT_MAGIC:
        raise CheckpointError("not a frameid checkpoint (bad magic line)")
    if magic[1] != str(CHECKPOINT_VERSION):
        raise CheckpointError(f"unsupported checkpoint version {magic[1]}, expected {CHECKPOINT_VERSION}")
    body = data[header_end + 1:]
    try:
        if hashlib.sha256(body).hexdigest() != header["payload_sha256"]:
            raise CheckpointError("checkpoint payload hash mismatch (file corrupt or truncated)")
        if vocab_hash_of(header["vocab"]) != header["vocab_hash"]:
            raise CheckpointError("checkpoint vocab hash mismatch")
        known = {f.name for f in fields(EncoderConfig)}
        config = EncoderConfig(**{k: v for k, v in header["config"].items() if k in known})
        k = int(header["k"])
    except (KeyError, TypeError, ContractError) as exc:
        raise CheckpointError(f"malformed checkpoint header: {exc}") from None

    tensors = {}
    pos = 0
    while pos < len(body):
        end = body.index(b"\n", pos)
        _, name, dtype, shape = body[pos:end].decode("ascii").split(" ")
        shape = tuple(int(s) for s in shape.split("x")) if shape else ()
        dt = np.dtype(dtype).newbyteorder("<")
        size = int(np.prod(shape)) * dt.itemsize
        raw = body[end + 1:end + 1 + size]
        tensors[name] = np.frombuffer(raw, dtype=dt).reshape(shape).astype(dtype)
        pos = end + 1 + size
    params = ModelParams(config, k, tensors)
    return Checkpoint(params, header["frames"], header["vocab"], header["vocab_hash"], header["extra"])
