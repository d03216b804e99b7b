"""Connectionist temporal classification: loss, gradient, greedy decoding,
and training of a small bidirectional recurrent acoustic model on synthetic
feature sequences.

Per-frame posteriors live in a PosteriorGrid whose column 0 is the blank
symbol.  The loss sums path probabilities over every frame labelling that
collapses (repeats removed, then blanks removed) to the target sequence,
evaluated by log-space forward-backward over the blank-augmented targets.
"""

import numpy as np

from .errors import ConfigError, DataError
from .kernels import ctc_forward_backward
from .nn import (BiLstmStack, NewbobSchedule, ParamStore, load_checkpoint,
                 log_softmax, save_checkpoint, sgd_newbob)

ROW_TOL = 1e-9


class PosteriorGrid:
    """(T, V) log posteriors, one row per frame; column 0 = blank."""

    def __init__(self, logp):
        logp = np.asarray(logp, dtype=np.float64)
        if logp.ndim != 2 or logp.shape[0] < 1 or logp.shape[1] < 2:
            raise DataError(f"bad posterior shape {logp.shape}")
        rows = np.log(np.sum(np.exp(logp - logp.max(axis=1, keepdims=True)),
                             axis=1)) + logp.max(axis=1)
        if np.max(np.abs(rows)) > ROW_TOL:
            raise DataError("posterior rows do not normalize")
        self.logp = logp

    @property
    def num_frames(self):
        return self.logp.shape[0]

    @property
    def num_symbols(self):
        return self.logp.shape[1]


def _augmented(z, num_symbols):
    z = list(z)
    if not z:
        raise DataError("empty label sequence")
    for u in z:
        if not 1 <= u < num_symbols:
            raise DataError(f"unit id {u} outside 1..{num_symbols - 1}")
    aug = np.zeros(2 * len(z) + 1, dtype=np.int64)
    aug[1::2] = z
    return aug


def min_frames(z):
    """Shortest frame count whose collapse can yield z: one frame per unit
    plus a blank separator inside each repeated pair."""
    z = list(z)
    return len(z) + sum(1 for a, b in zip(z, z[1:]) if a == b)


def ctc_loss(grid, z):
    """-ln P(z | grid), summing over all collapsing frame labellings."""
    aug = _augmented(z, grid.num_symbols)
    if min_frames(z) > grid.num_frames:
        raise DataError("label too long for frame count")
    loglik, _ = ctc_forward_backward(grid.logp, aug)
    return -loglik


def ctc_grad(grid, z):
    """(loss, gradient wrt pre-softmax logits); grad rows sum to 0."""
    aug = _augmented(z, grid.num_symbols)
    if min_frames(z) > grid.num_frames:
        raise DataError("label too long for frame count")
    loglik, gamma = ctc_forward_backward(grid.logp, aug)
    return -loglik, np.exp(grid.logp) - gamma


def greedy_collapse(grid):
    """Best-per-frame labelling collapsed: repeats merged, blanks dropped."""
    path = np.argmax(grid.logp, axis=1)
    out = []
    prev = -1
    for s in path:
        if s != prev and s != 0:
            out.append(int(s))
        prev = s
    return out


def unit_error_rate(pairs):
    """Mean Levenshtein rate of hypothesis unit lists against references."""
    from .kernels import levenshtein_counts
    errs = 0
    total = 0
    for ref, hyp in pairs:
        dist, _, _, _ = levenshtein_counts(np.asarray(ref, dtype=np.int64),
                                           np.asarray(hyp, dtype=np.int64))
        errs += int(dist)
        total += len(ref)
    return errs / max(total, 1)


class AcousticModel:
    """Bidirectional recurrent encoder with a linear soft-max output layer
    producing per-frame log posteriors over units plus blank."""

    def __init__(self, input_dim, num_units, hidden_dim=32, num_layers=1,
                 seed=0, init_scale=0.1):
        if num_units < 1:
            raise ConfigError("need at least one output unit")
        self.input_dim = input_dim
        self.num_units = num_units
        self.hidden_dim = hidden_dim
        self.num_layers = num_layers
        self.store = ParamStore(seed)
        self.stack = BiLstmStack(self.store, "enc", input_dim, hidden_dim,
                                 num_layers, init_scale)
        self.vocab = num_units + 1
        self.store.add("out.W", (self.stack.output_dim, self.vocab), init_scale)
        self.store.add("out.b", (self.vocab,), 0.0)

    def forward(self, feats):
        feats = np.asarray(feats, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[1] != self.input_dim:
            raise DataError(f"feature shape {feats.shape} does not match "
                            f"input dim {self.input_dim}")
        hs, caches = self.stack.forward(feats)
        logits = hs @ self.store.params["out.W"] + self.store.params["out.b"]
        return log_softmax(logits), (caches, hs)

    def posteriors(self, feats):
        logp, _ = self.forward(feats)
        return PosteriorGrid(logp)

    def backward(self, cache, dlogits, grads):
        caches, hs = cache
        grads["out.W"] += hs.T @ dlogits
        grads["out.b"] += dlogits.sum(axis=0)
        dhs = dlogits @ self.store.params["out.W"].T
        self.stack.backward(caches, dhs, grads)

    def save(self, path, extra=None):
        meta = {"input_dim": self.input_dim, "num_units": self.num_units,
                "hidden_dim": self.hidden_dim, "num_layers": self.num_layers}
        if extra:
            meta.update(extra)
        save_checkpoint(self.store, path, extra=meta)

    @classmethod
    def load(cls, path):
        store, meta = load_checkpoint(path)
        model = cls(meta["input_dim"], meta["num_units"], meta["hidden_dim"],
                    meta["num_layers"], seed=store.seed)
        for name, value in store.params.items():
            model.store.params[name][...] = value
        model.store.frozen = set(store.frozen)
        return model


def _check_pair(utt_id, feats, labels):
    if len(labels) == 0:
        raise DataError(f"utterance {utt_id}: empty label sequence")
    if min_frames(labels) > feats.shape[0]:
        raise DataError(f"utterance {utt_id}: label too long for frame count")


def train_am(dataset, config):
    """Utterance-level CTC training with the halving learning-rate schedule.

    dataset: iterable of (utt_id, features (T, D), unit id list).
    config keys: num_units (required), hidden_dim, num_layers, seed,
    learning_rate, epochs, schedule_threshold, max_grad_norm.
    Returns (model, per-epoch mean loss history).
    """
    data = [(u, np.asarray(f, dtype=np.float64), list(z)) for u, f, z in dataset]
    if not data:
        raise DataError("empty training set")
    num_units = int(config["num_units"])
    model = AcousticModel(
        data[0][1].shape[1], num_units,
        hidden_dim=int(config.get("hidden_dim", 32)),
        num_layers=int(config.get("num_layers", 1)),
        seed=int(config.get("seed", 0)))
    for utt_id, feats, labels in data:
        if feats.ndim != 2 or feats.shape[1] != model.input_dim:
            raise DataError(f"utterance {utt_id}: bad feature shape {feats.shape}")
        for u in labels:
            if not 1 <= u <= num_units:
                raise DataError(f"utterance {utt_id}: unit id {u} out of range")
        _check_pair(utt_id, feats, labels)

    sched = NewbobSchedule(
        lr=float(config.get("learning_rate", 4e-5)),
        threshold=float(config.get("schedule_threshold", 0.5)))
    max_norm = float(config.get("max_grad_norm", 5.0))
    history = []
    for _ in range(int(config.get("epochs", 20))):
        total = 0.0
        for utt_id, feats, labels in data:
            logp, cache = model.forward(feats)
            aug = _augmented(labels, model.vocab)
            loglik, gamma = ctc_forward_backward(logp, aug)
            total += -loglik
            grads = model.store.zero_grads()
            model.backward(cache, np.exp(logp) - gamma, grads)
            sgd_newbob(model.store, grads, sched, max_norm)
        mean_loss = total / len(data)
        history.append(mean_loss)
        sched.update(mean_loss)
    return model, history


def make_unit_means(num_units, dim, seed, scale=2.0):
    """Per-unit emission centers, row 0 reserved for blank-free indexing:
    row u is the mean vector for unit id u (1-based)."""
    rng = np.random.default_rng(seed)
    return rng.normal(scale=scale, size=(num_units + 1, dim))


def synth_features(labels, means, rng, min_dwell=2, max_dwell=4, noise=0.3):
    """Emit each unit as 2-4 noisy copies of its mean vector."""
    if not labels:
        raise DataError("cannot synthesize features for an empty sequence")
    rows = []
    for u in labels:
        if not 1 <= u < means.shape[0]:
            raise DataError(f"unit id {u} has no emission mean")
        dwell = int(rng.integers(min_dwell, max_dwell + 1))
        rows.append(means[u] + rng.normal(scale=noise,
                                          size=(dwell, means.shape[1])))
    return np.concatenate(rows, axis=0)


def write_features(path, table):
    """Text matrices: per utterance a 'utt_id T dim' header then T rows."""
    with open(path, "w", encoding="utf-8") as fh:
        for utt_id in table:
            mat = np.asarray(table[utt_id], dtype=np.float64)
            fh.write(f"{utt_id} {mat.shape[0]} {mat.shape[1]}\n")
            for row in mat:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_features(path):
    from .errors import ParseError
    table = {}
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    i = 0
    while i < len(lines):
        head = lines[i].split()
        if len(head) != 3:
            raise ParseError(f"bad feature header {lines[i]!r}", line=i + 1)
        utt_id = head[0]
        try:
            T, dim = int(head[1]), int(head[2])
        except ValueError:
            raise ParseError(f"bad feature header {lines[i]!r}", line=i + 1)
        if utt_id in table:
            raise ParseError(f"duplicate utterance {utt_id}", line=i + 1)
        block = lines[i + 1:i + 1 + T]
        if len(block) < T:
            raise ParseError(f"truncated matrix for {utt_id}", line=len(lines))
        try:
            mat = np.array([[float(v) for v in row.split()] for row in block])
        except ValueError:
            raise ParseError(f"non-numeric row in {utt_id}", line=i + 2)
        if mat.shape != (T, dim):
            raise ParseError(f"matrix shape mismatch for {utt_id}", line=i + 1)
        table[utt_id] = mat
        i += 1 + T
    return table


def write_labels(path, table):
    """Per-utterance unit id lines: 'utt_id id id ...'."""
    with open(path, "w", encoding="utf-8") as fh:
        for utt_id in table:
            fh.write(utt_id + " " + " ".join(str(u) for u in table[utt_id]) + "\n")


def read_labels(path):
    from .errors import ParseError
    table = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if parts[0] in table:
                raise ParseError(f"duplicate utterance {parts[0]}", line=lineno)
            try:
                table[parts[0]] = [int(tok) for tok in parts[1:]]
            except ValueError:
                raise ParseError(f"non-numeric unit id for {parts[0]}",
                                 line=lineno)
    return table
