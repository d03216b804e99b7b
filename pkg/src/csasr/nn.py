"""Neural building blocks: LSTM layers with manual backprop, softmax
cross-entropy, finite-difference gradient checking, SGD with gradient
clipping, and the improvement-triggered halving learning-rate schedule.

Parameters live in a ParamStore keyed by name; frozen entries (ingested
embeddings) are excluded from updates and gradient checks and stay
bit-identical across training.
"""

import json

import numpy as np

from .errors import ConfigError, DataError, TrainingError


class ParamStore:
    """Named float64 parameter arrays with a frozen subset and one RNG."""

    def __init__(self, seed):
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)
        self.params = {}
        self.frozen = set()

    def add(self, name, shape, scale=0.1):
        if name in self.params:
            raise ConfigError(f"parameter {name!r} already registered")
        self.params[name] = self.rng.uniform(-scale, scale, size=shape)
        return self.params[name]

    def set(self, name, value, frozen=False):
        if name in self.params:
            raise ConfigError(f"parameter {name!r} already registered")
        self.params[name] = np.array(value, dtype=np.float64)
        if frozen:
            self.frozen.add(name)
        return self.params[name]

    def zero_grads(self):
        return {n: np.zeros_like(p) for n, p in self.params.items() if n not in self.frozen}


def clip_grads(grads, max_norm):
    """Global L2 clipping; returns the pre-clip norm."""
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g * g))
    norm = float(np.sqrt(total))
    if not np.isfinite(norm):
        raise TrainingError("non-finite gradient norm")
    if max_norm is not None and norm > max_norm and norm > 0.0:
        ratio = max_norm / norm
        for g in grads.values():
            g *= ratio
    return norm


def sgd_step(store, grads, lr, max_norm=5.0):
    """In-place SGD update; frozen parameters are never touched."""
    clip_grads(grads, max_norm)
    for name, g in grads.items():
        if name in store.frozen:
            continue
        p = store.params[name]
        p -= lr * g
        if not np.all(np.isfinite(p)):
            raise TrainingError(f"parameter {name!r} became non-finite")


class NewbobSchedule:
    """Constant rate until epoch improvement falls under the threshold,
    then halve every epoch from that point on (sticky halving)."""

    def __init__(self, lr=4e-5, threshold=0.5):
        self.lr = float(lr)
        self.threshold = float(threshold)
        self.halving = False
        self.prev_metric = None

    def update(self, metric):
        """Feed the epoch-end validation metric (lower is better, same
        scale as the threshold); returns the rate for the next epoch."""
        metric = float(metric)
        if self.prev_metric is not None:
            improvement = self.prev_metric - metric
            if self.halving or improvement < self.threshold:
                self.halving = True
                self.lr *= 0.5
        self.prev_metric = metric
        return self.lr

    def state_dict(self):
        return {"lr": self.lr, "threshold": self.threshold,
                "halving": self.halving, "prev_metric": self.prev_metric}

    @classmethod
    def from_state(cls, state):
        s = cls(state["lr"], state["threshold"])
        s.halving = bool(state["halving"])
        s.prev_metric = state["prev_metric"]
        return s


def sgd_newbob(store, grads, schedule, max_norm=5.0):
    """One clipped SGD step at the schedule's current rate.  The schedule
    advances via schedule.update(metric) at epoch boundaries, not here."""
    sgd_step(store, grads, schedule.lr, max_norm)
    return store, schedule


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


class LstmLayer:
    """Single-direction LSTM with combined weights [bias; input; recurrent]
    of shape (1 + input_dim + hidden_dim, 4*hidden_dim), gate column
    order input, forget, output, candidate."""

    def __init__(self, store, name, input_dim, hidden_dim, init_scale=0.1):
        if input_dim < 1 or hidden_dim < 1:
            raise ConfigError("LSTM dimensions must be positive")
        self.name = name
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.store = store
        self.w_name = f"{name}.W"
        store.add(self.w_name, (1 + input_dim + hidden_dim, 4 * hidden_dim), init_scale)

    @property
    def weights(self):
        return self.store.params[self.w_name]

    def forward(self, xs, h0=None, c0=None):
        """xs: (T, input_dim) -> hidden states (T, hidden_dim) plus cache."""
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[1] != self.input_dim:
            raise ConfigError(f"{self.name}: expected (T, {self.input_dim}) input, got {xs.shape}")
        T = xs.shape[0]
        H = self.hidden_dim
        W = self.weights
        full = np.empty((T, 1 + self.input_dim + H))
        full[:, 0] = 1.0
        full[:, 1:1 + self.input_dim] = xs
        gates_i = np.empty((T, H))
        gates_f = np.empty((T, H))
        gates_o = np.empty((T, H))
        gates_g = np.empty((T, H))
        cs = np.empty((T, H))
        tanh_c = np.empty((T, H))
        hs = np.empty((T, H))
        h = np.zeros(H) if h0 is None else h0
        c = np.zeros(H) if c0 is None else c0
        for t in range(T):
            full[t, 1 + self.input_dim:] = h
            acts = full[t] @ W
            i = _sigmoid(acts[0:H])
            f = _sigmoid(acts[H:2 * H])
            o = _sigmoid(acts[2 * H:3 * H])
            g = np.tanh(acts[3 * H:4 * H])
            c = f * c + i * g
            tc = np.tanh(c)
            h = o * tc
            gates_i[t], gates_f[t], gates_o[t], gates_g[t] = i, f, o, g
            cs[t], tanh_c[t], hs[t] = c, tc, h
        cache = (full, gates_i, gates_f, gates_o, gates_g, cs, tanh_c,
                 np.zeros(H) if c0 is None else c0)
        return hs, cache

    def step(self, x, h, c):
        """One cell update for incremental decoding; no cache kept."""
        H = self.hidden_dim
        acts = np.concatenate(([1.0], x, h)) @ self.weights
        i = _sigmoid(acts[0:H])
        f = _sigmoid(acts[H:2 * H])
        o = _sigmoid(acts[2 * H:3 * H])
        g = np.tanh(acts[3 * H:4 * H])
        c_new = f * c + i * g
        return o * np.tanh(c_new), c_new

    def backward(self, cache, dhs, grads):
        """dhs: (T, hidden_dim) upstream; accumulates dW into grads and
        returns gradients w.r.t. the inputs (T, input_dim)."""
        full, gi, gf, go, gg, cs, tanh_c, c0 = cache
        T, H = gi.shape
        W = self.weights
        dW = grads[self.w_name]
        dxs = np.empty((T, self.input_dim))
        dh_next = np.zeros(H)
        dc_next = np.zeros(H)
        for t in range(T - 1, -1, -1):
            dh = dhs[t] + dh_next
            dc = dc_next + dh * go[t] * (1.0 - tanh_c[t] ** 2)
            do = dh * tanh_c[t]
            c_prev = cs[t - 1] if t > 0 else c0
            di = dc * gg[t]
            df = dc * c_prev
            dg = dc * gi[t]
            dacts = np.concatenate([
                di * gi[t] * (1.0 - gi[t]),
                df * gf[t] * (1.0 - gf[t]),
                do * go[t] * (1.0 - go[t]),
                dg * (1.0 - gg[t] ** 2),
            ])
            dW += np.outer(full[t], dacts)
            dfull = W @ dacts
            dxs[t] = dfull[1:1 + self.input_dim]
            dh_next = dfull[1 + self.input_dim:]
            dc_next = dc * gf[t]
        return dxs


def lstm_forward(layer, xs, direction="forward"):
    """Run a layer over time, optionally right to left; output stays in
    input time order either way."""
    if direction == "forward":
        hs, cache = layer.forward(xs)
        return hs, (cache, False)
    if direction == "backward":
        hs, cache = layer.forward(np.asarray(xs, dtype=np.float64)[::-1])
        return hs[::-1], (cache, True)
    raise ConfigError(f"unknown direction {direction!r}")


def lstm_backward(layer, cache, dhs, grads):
    inner, reversed_time = cache
    if reversed_time:
        return layer.backward(inner, np.asarray(dhs)[::-1], grads)[::-1]
    return layer.backward(inner, dhs, grads)


class BiLstmStack:
    """Stacked bidirectional layers; per-step output concatenates the two
    directions, so each upper layer consumes 2*hidden features."""

    def __init__(self, store, name, input_dim, hidden_dim, num_layers, init_scale=0.1):
        if num_layers < 1:
            raise ConfigError("need at least one layer")
        self.layers = []
        dim = input_dim
        for i in range(num_layers):
            fw = LstmLayer(store, f"{name}.l{i}.fw", dim, hidden_dim, init_scale)
            bw = LstmLayer(store, f"{name}.l{i}.bw", dim, hidden_dim, init_scale)
            self.layers.append((fw, bw))
            dim = 2 * hidden_dim
        self.output_dim = dim

    def forward(self, xs):
        caches = []
        cur = np.asarray(xs, dtype=np.float64)
        for fw, bw in self.layers:
            hf, cf = lstm_forward(fw, cur, "forward")
            hb, cb = lstm_forward(bw, cur, "backward")
            caches.append((cf, cb))
            cur = np.concatenate([hf, hb], axis=1)
        return cur, caches

    def backward(self, caches, dout, grads):
        d = np.asarray(dout)
        for (fw, bw), (cf, cb) in zip(reversed(self.layers), reversed(caches)):
            H = fw.hidden_dim
            dxf = lstm_backward(fw, cf, d[:, :H], grads)
            dxb = lstm_backward(bw, cb, d[:, H:], grads)
            d = dxf + dxb
        return d


def log_softmax(logits):
    logits = np.asarray(logits, dtype=np.float64)
    m = logits.max(axis=-1, keepdims=True)
    z = logits - m
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def softmax_xent(logits, targets):
    """Mean negative log likelihood over rows plus gradient w.r.t. logits.

    logits: (K, V); targets: (K,) class ids.  Gradient is
    (softmax - onehot) / K, matching the mean reduction.
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets)
    if logits.ndim != 2 or targets.ndim != 1 or logits.shape[0] != targets.shape[0]:
        raise DataError(f"shape mismatch: logits {logits.shape}, targets {targets.shape}")
    K, V = logits.shape
    if K == 0:
        raise DataError("empty batch")
    if targets.min() < 0 or targets.max() >= V:
        raise DataError("target id outside logit range")
    logp = log_softmax(logits)
    loss = -float(np.mean(logp[np.arange(K), targets]))
    grad = np.exp(logp)
    grad[np.arange(K), targets] -= 1.0
    grad /= K
    return loss, grad


def grad_check(loss_and_grads, store, epsilon=1e-5, tolerance=1e-4):
    """Central-difference check of analytic gradients for every non-frozen
    parameter element.  loss_and_grads() -> (loss, grads dict) evaluated
    at the store's current parameters.  Returns (passed, report) where
    report maps parameter names to their worst relative error."""
    _, grads = loss_and_grads()
    report = {}
    passed = True
    for name in sorted(grads):
        if name in store.frozen:
            continue
        p = store.params[name]
        g = grads[name]
        worst = 0.0
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + epsilon
            lp, _ = loss_and_grads()
            p[idx] = orig - epsilon
            lm, _ = loss_and_grads()
            p[idx] = orig
            numeric = (lp - lm) / (2.0 * epsilon)
            denom = max(1e-8, abs(numeric), abs(g[idx]))
            rel = abs(numeric - g[idx]) / denom
            worst = max(worst, rel)
        report[name] = worst
        if worst > tolerance:
            passed = False
    return passed, report


def save_checkpoint(store, path, extra=None):
    """npz with all arrays plus a JSON metadata entry (seed, frozen set,
    caller extras); round-trips bit-exactly."""
    meta = {"seed": store.seed, "frozen": sorted(store.frozen),
            "extra": extra if extra is not None else {}}
    arrays = {f"param/{n}": p for n, p in store.params.items()}
    arrays["__meta__"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path):
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        store = ParamStore(meta["seed"])
        for key in data.files:
            if key.startswith("param/"):
                store.params[key[len("param/"):]] = data[key].copy()
    store.frozen = set(meta["frozen"])
    return store, meta["extra"]
