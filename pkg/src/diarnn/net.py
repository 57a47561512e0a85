"""Emission side of the model.

A single GRU cell with a two-layer head is shared by every speaker, but
each speaker owns a private state thread that advances only on that
speaker's segments, so the threads interleave along the utterance.  The
cell update for the speaker active at step t consumes that speaker's
previous observation and previous hidden state, never the current
observation; a speaker's first step starts from a zero observation and a
zero state.  The observation at step t is modeled as a spherical Gaussian
around the running mean of the speaker's head outputs up to and including
step t, which keeps the mean a function of strictly past observations.

Gate convention (fixed; checkpoints record and verify it):

    u  = sigmoid(Wu x + Uu h + bu)        update gate
    r  = sigmoid(Wr x + Ur h + br)        reset gate
    c  = tanh(Wc x + Uc (r * h) + bc)     candidate state
    h' = (1 - u) * h + u * c

Head: m = W2 relu(W1 h' + b1) + b2.  The final layer is linear by
default; ``relu_output`` rectifies it as well, which confines emission
means to the nonnegative orthant and is only useful when the embeddings
live there too.

All computation is float64.
"""

import math
from dataclasses import dataclass

import numpy as np

from .sequences import EmbeddingSequence

__all__ = [
    "GATE_CONVENTION",
    "TENSOR_FIELDS",
    "NetParams",
    "NetGrads",
    "EmissionParams",
    "SpeakerThread",
    "GradientResult",
    "gru_forward",
    "output_forward",
    "gaussian_log_pdf",
    "fresh_thread",
    "advance_thread",
    "thread_emission_mean",
    "forward_log_likelihood",
    "backward_gradients",
    "init_net_params",
]

GATE_CONVENTION = (
    "u=sigmoid(Wu@x+Uu@h+bu);r=sigmoid(Wr@x+Ur@h+br);"
    "c=tanh(Wc@x+Uc@(r*h)+bc);h_next=(1-u)*h+u*c;"
    "head=W2@relu(W1@h_next+b1)+b2"
)

TENSOR_FIELDS = (
    "w_update", "u_update", "b_update",
    "w_reset", "u_reset", "b_reset",
    "w_cand", "u_cand", "b_cand",
    "w_fc1", "b_fc1", "w_fc2", "b_fc2",
)

LOG_TWO_PI = math.log(2.0 * math.pi)


@dataclass
class NetParams:
    """Weights of the shared cell and head.

    Shapes for input dim d, hidden dim H, head width F:
    w_* (H, d), u_* (H, H), b_* (H,) for the three gates;
    w_fc1 (F, H), b_fc1 (F,), w_fc2 (d, F), b_fc2 (d,).

    Mutable on purpose: training updates the arrays in place between
    batches.  Nothing mutates them during a forward or backward pass.
    """

    w_update: np.ndarray
    u_update: np.ndarray
    b_update: np.ndarray
    w_reset: np.ndarray
    u_reset: np.ndarray
    b_reset: np.ndarray
    w_cand: np.ndarray
    u_cand: np.ndarray
    b_cand: np.ndarray
    w_fc1: np.ndarray
    b_fc1: np.ndarray
    w_fc2: np.ndarray
    b_fc2: np.ndarray
    relu_output: bool = False

    def __post_init__(self):
        for name in TENSOR_FIELDS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if self.w_update.ndim != 2 or self.w_fc1.ndim != 2:
            raise ValueError("w_update and w_fc1 must be matrices")
        hidden, dim = self.w_update.shape
        fc = self.w_fc1.shape[0]
        expected = {
            "w_update": (hidden, dim), "u_update": (hidden, hidden), "b_update": (hidden,),
            "w_reset": (hidden, dim), "u_reset": (hidden, hidden), "b_reset": (hidden,),
            "w_cand": (hidden, dim), "u_cand": (hidden, hidden), "b_cand": (hidden,),
            "w_fc1": (fc, hidden), "b_fc1": (fc,),
            "w_fc2": (dim, fc), "b_fc2": (dim,),
        }
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise ValueError(f"{name} has shape {actual}, expected {shape}")
        for name in TENSOR_FIELDS:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite values")

    @property
    def input_dim(self) -> int:
        return self.w_update.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w_update.shape[0]

    @property
    def fc_dim(self) -> int:
        return self.w_fc1.shape[0]

    def tensor_dict(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TENSOR_FIELDS}


@dataclass
class NetGrads:
    """Per-tensor gradients, shaped exactly like the NetParams tensors."""

    w_update: np.ndarray
    u_update: np.ndarray
    b_update: np.ndarray
    w_reset: np.ndarray
    u_reset: np.ndarray
    b_reset: np.ndarray
    w_cand: np.ndarray
    u_cand: np.ndarray
    b_cand: np.ndarray
    w_fc1: np.ndarray
    b_fc1: np.ndarray
    w_fc2: np.ndarray
    b_fc2: np.ndarray

    @classmethod
    def zeros(cls, params: NetParams) -> "NetGrads":
        return cls(**{
            name: np.zeros_like(arr) for name, arr in params.tensor_dict().items()
        })

    def tensor_dict(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TENSOR_FIELDS}

    def add_(self, other: "NetGrads") -> None:
        for name in TENSOR_FIELDS:
            getattr(self, name).__iadd__(getattr(other, name))

    def scale_(self, factor: float) -> None:
        for name in TENSOR_FIELDS:
            getattr(self, name).__imul__(factor)

    def sq_norm(self) -> float:
        return float(sum((getattr(self, name) ** 2).sum() for name in TENSOR_FIELDS))

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(getattr(self, name))) for name in TENSOR_FIELDS)


@dataclass
class EmissionParams:
    """Scalar emission variance, stored as its log so updates stay
    unconstrained while the variance stays positive."""

    log_sigma2: float

    @property
    def sigma2(self) -> float:
        return math.exp(self.log_sigma2)


def _sigmoid(v: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-v))


def gru_forward(x: np.ndarray, h: np.ndarray, params: NetParams) -> np.ndarray:
    """One cell update for a single speaker thread."""
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if x.shape != (params.input_dim,):
        raise ValueError(f"input has shape {x.shape}, expected ({params.input_dim},)")
    if h.shape != (params.hidden_dim,):
        raise ValueError(f"state has shape {h.shape}, expected ({params.hidden_dim},)")
    u = _sigmoid(params.w_update @ x + params.u_update @ h + params.b_update)
    r = _sigmoid(params.w_reset @ x + params.u_reset @ h + params.b_reset)
    c = np.tanh(params.w_cand @ x + params.u_cand @ (r * h) + params.b_cand)
    return (1.0 - u) * h + u * c


def output_forward(h: np.ndarray, params: NetParams) -> np.ndarray:
    """Head mapping a hidden state to a point in embedding space."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (params.hidden_dim,):
        raise ValueError(f"state has shape {h.shape}, expected ({params.hidden_dim},)")
    a1 = np.maximum(params.w_fc1 @ h + params.b_fc1, 0.0)
    m = params.w_fc2 @ a1 + params.b_fc2
    if params.relu_output:
        m = np.maximum(m, 0.0)
    return m


def gaussian_log_pdf(x: np.ndarray, mu: np.ndarray, sigma2: float) -> float:
    """Log-density of a spherical Gaussian with variance sigma2 per axis."""
    if sigma2 <= 0.0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    x = np.asarray(x, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if x.shape != mu.shape or x.ndim != 1:
        raise ValueError(f"mismatched shapes {x.shape} vs {mu.shape}")
    diff = x - mu
    return (
        -0.5 * x.shape[0] * (LOG_TWO_PI + math.log(sigma2))
        - float(diff @ diff) / (2.0 * sigma2)
    )


@dataclass(frozen=True)
class SpeakerThread:
    """Recurrent state for one speaker.

    ``hidden`` has already been advanced past the speaker's latest
    observation, so it is the state the cell occupies at the speaker's next
    step, and ``output`` caches the head value for it.  ``mean_sum`` and
    ``count`` accumulate head outputs over the speaker's committed steps;
    the emission mean for the next step is (mean_sum + output) / (count + 1),
    i.e. the running mean after the pending output joins it.

    Instances are immutable and may be shared freely between decoder
    hypotheses.
    """

    hidden: np.ndarray
    output: np.ndarray
    mean_sum: np.ndarray
    count: int


def fresh_thread(params: NetParams) -> SpeakerThread:
    """Thread for a speaker about to emit its first segment (zero input,
    zero state)."""
    hidden = gru_forward(
        np.zeros(params.input_dim), np.zeros(params.hidden_dim), params
    )
    return SpeakerThread(
        hidden, output_forward(hidden, params), np.zeros(params.input_dim), 0
    )


def thread_emission_mean(thread: SpeakerThread) -> np.ndarray:
    return (thread.mean_sum + thread.output) / (thread.count + 1)


def advance_thread(thread: SpeakerThread, x: np.ndarray, params: NetParams) -> SpeakerThread:
    """Fold the observation just emitted by this speaker into its thread."""
    hidden = gru_forward(np.asarray(x, dtype=np.float64), thread.hidden, params)
    return SpeakerThread(
        hidden,
        output_forward(hidden, params),
        thread.mean_sum + thread.output,
        thread.count + 1,
    )


def _as_matrix(X) -> np.ndarray:
    if isinstance(X, EmbeddingSequence):
        return X.values
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"embeddings must be a T x d matrix, got shape {arr.shape}")
    return arr


def forward_log_likelihood(X, labels, net: NetParams, em: EmissionParams):
    """Teacher-forced log-likelihood of an utterance under fixed labels.

    Returns the total log-density plus the (T, d) record of per-step
    emission means.  ``labels`` may be any positive-integer sequence, not
    necessarily canonical: only the grouping pattern matters.
    """
    x = _as_matrix(X)
    labs = [int(v) for v in labels]
    if len(labs) != x.shape[0]:
        raise ValueError(
            f"length mismatch: {x.shape[0]} embeddings vs {len(labs)} labels"
        )
    if any(v < 1 for v in labs):
        raise ValueError("labels must be positive integers")
    if x.shape[1] != net.input_dim:
        raise ValueError(f"embedding dim {x.shape[1]} != net input dim {net.input_dim}")
    sigma2 = em.sigma2
    threads: dict[int, SpeakerThread] = {}
    fresh = fresh_thread(net)
    mus = np.empty_like(x)
    total = 0.0
    for t in range(x.shape[0]):
        speaker = labs[t]
        thread = threads.get(speaker, fresh)
        mu = thread_emission_mean(thread)
        mus[t] = mu
        total += gaussian_log_pdf(x[t], mu, sigma2)
        threads[speaker] = advance_thread(thread, x[t], net)
    return total, mus


@dataclass
class GradientResult:
    """Gradients of the emission log-likelihood for one utterance, plus the
    likelihood value itself (the forward pass comes for free)."""

    net: NetGrads
    log_sigma2: float
    log_likelihood: float


def backward_gradients(X, labels, net: NetParams, em: EmissionParams) -> GradientResult:
    """Exact reverse-mode gradients of forward_log_likelihood with respect
    to every net tensor and to log(sigma2).

    Two coupling paths matter and both are handled here: the hidden-state
    chain across each speaker's interleaved steps, and the running mean,
    through which a head output at step s feeds the emission mean of every
    later step of the same speaker with weight 1/count at that step.
    """
    x = _as_matrix(X)
    labs = [int(v) for v in labels]
    if len(labs) != x.shape[0]:
        raise ValueError(
            f"length mismatch: {x.shape[0]} embeddings vs {len(labs)} labels"
        )
    if any(v < 1 for v in labs):
        raise ValueError("labels must be positive integers")
    if x.shape[1] != net.input_dim:
        raise ValueError(f"embedding dim {x.shape[1]} != net input dim {net.input_dim}")

    steps, dim = x.shape
    sigma2 = em.sigma2
    zeros_x = np.zeros(dim)
    zeros_h = np.zeros(net.hidden_dim)

    # Forward pass, caching every intermediate the reverse sweep needs.
    prev: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    counts: dict[int, int] = {}
    mean_sums: dict[int, np.ndarray] = {}
    cache = []
    total = 0.0
    g_log_sigma2 = 0.0
    for t in range(steps):
        speaker = labs[t]
        x_in, h_in = prev.get(speaker, (zeros_x, zeros_h))
        u = _sigmoid(net.w_update @ x_in + net.u_update @ h_in + net.b_update)
        r = _sigmoid(net.w_reset @ x_in + net.u_reset @ h_in + net.b_reset)
        rh = r * h_in
        c = np.tanh(net.w_cand @ x_in + net.u_cand @ rh + net.b_cand)
        h = (1.0 - u) * h_in + u * c
        a1 = np.maximum(net.w_fc1 @ h + net.b_fc1, 0.0)
        m = net.w_fc2 @ a1 + net.b_fc2
        if net.relu_output:
            m = np.maximum(m, 0.0)
        count = counts.get(speaker, 0) + 1
        counts[speaker] = count
        running = mean_sums.get(speaker)
        running = m.copy() if running is None else running + m
        mean_sums[speaker] = running
        mu = running / count
        resid = x[t] - mu
        sq = float(resid @ resid)
        total += -0.5 * dim * (LOG_TWO_PI + math.log(sigma2)) - sq / (2.0 * sigma2)
        g_log_sigma2 += sq / (2.0 * sigma2) - 0.5 * dim
        cache.append((speaker, x_in, h_in, u, r, rh, c, h, a1, m, resid, count))
        prev[speaker] = (x[t], h)

    grads = NetGrads.zeros(net)
    dmean: dict[int, np.ndarray] = {}  # sum over later same-speaker steps of dmu/count
    dh_carry: dict[int, np.ndarray] = {}
    for speaker, x_in, h_in, u, r, rh, c, h, a1, m, resid, count in reversed(cache):
        acc = dmean.get(speaker)
        dmu = resid / sigma2
        acc = dmu / count if acc is None else acc + dmu / count
        dmean[speaker] = acc
        dm = acc * (m > 0.0) if net.relu_output else acc
        # head
        grads.w_fc2 += np.outer(dm, a1)
        grads.b_fc2 += dm
        da1 = (net.w_fc2.T @ dm) * (a1 > 0.0)
        grads.w_fc1 += np.outer(da1, h)
        grads.b_fc1 += da1
        dh = net.w_fc1.T @ da1
        carry = dh_carry.pop(speaker, None)
        if carry is not None:
            dh = dh + carry
        # cell
        du = dh * (c - h_in)
        dc = dh * u
        dh_in = dh * (1.0 - u)
        dac = dc * (1.0 - c * c)
        grads.w_cand += np.outer(dac, x_in)
        grads.u_cand += np.outer(dac, rh)
        grads.b_cand += dac
        drh = net.u_cand.T @ dac
        dr = drh * h_in
        dh_in = dh_in + drh * r
        dau = du * u * (1.0 - u)
        dar = dr * r * (1.0 - r)
        grads.w_update += np.outer(dau, x_in)
        grads.u_update += np.outer(dau, h_in)
        grads.b_update += dau
        grads.w_reset += np.outer(dar, x_in)
        grads.u_reset += np.outer(dar, h_in)
        grads.b_reset += dar
        dh_carry[speaker] = dh_in + net.u_update.T @ dau + net.u_reset.T @ dar
    return GradientResult(grads, g_log_sigma2, total)


def init_net_params(
    input_dim: int,
    hidden_dim: int,
    fc_dim: int,
    rng: np.random.Generator,
    relu_output: bool = False,
) -> NetParams:
    """Seeded uniform initialization, bound 1/sqrt(fan_in) per tensor.

    Cell input weights use fan_in = input_dim; recurrent weights and cell
    biases use the hidden width; head tensors use their own layer fan-in.
    """

    def uniform(shape, fan_in):
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    return NetParams(
        w_update=uniform((hidden_dim, input_dim), input_dim),
        u_update=uniform((hidden_dim, hidden_dim), hidden_dim),
        b_update=uniform((hidden_dim,), hidden_dim),
        w_reset=uniform((hidden_dim, input_dim), input_dim),
        u_reset=uniform((hidden_dim, hidden_dim), hidden_dim),
        b_reset=uniform((hidden_dim,), hidden_dim),
        w_cand=uniform((hidden_dim, input_dim), input_dim),
        u_cand=uniform((hidden_dim, hidden_dim), hidden_dim),
        b_cand=uniform((hidden_dim,), hidden_dim),
        w_fc1=uniform((fc_dim, hidden_dim), hidden_dim),
        b_fc1=uniform((fc_dim,), hidden_dim),
        w_fc2=uniform((input_dim, fc_dim), fc_dim),
        b_fc2=uniform((input_dim,), fc_dim),
        relu_output=relu_output,
    )
