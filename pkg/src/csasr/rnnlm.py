"""Recurrent language model over a bilingual vocabulary with a frozen
cross-lingual embedding input layer.

The embedding matrix is ingested from an aligned EmbeddingSpace and never
updated; rows for the sentence markers and the unknown word are created at
build time and frozen with it.  The start marker is input-only: its output
logit is masked to -inf, so every predictive distribution ranges over the
real vocabulary plus the sentence end and unknown word.
"""

import math
import warnings

import numpy as np

from .errors import ConfigError, DataError
from .ngram import sentence_word_logps as ngram_word_logps
from .nn import (LstmLayer, NewbobSchedule, ParamStore, load_checkpoint,
                 log_softmax, save_checkpoint, sgd_step, softmax_xent)

SOS = "<s>"
EOS = "</s>"
UNK = "<unk>"


class RnnLm:
    """LSTM LM; vocab = [<s>, </s>, <unk>] + embedding words in order."""

    def __init__(self, words, embedding_matrix, hidden_dim=64, num_layers=1,
                 seed=0, init_scale=0.1):
        for special in (SOS, EOS, UNK):
            if special in words:
                raise DataError(f"embedding vocabulary must not contain {special}")
        self.vocab = [SOS, EOS, UNK] + list(words)
        self.index = {w: i for i, w in enumerate(self.vocab)}
        if len(self.index) != len(self.vocab):
            raise DataError("duplicate word in vocabulary")
        matrix = np.asarray(embedding_matrix, dtype=np.float64)
        if matrix.shape[0] != len(words):
            raise ConfigError("embedding rows do not match vocabulary size")
        self.dim = matrix.shape[1]
        self.hidden_dim = hidden_dim
        self.num_layers = num_layers
        self.store = ParamStore(seed)
        special_rows = self.store.rng.uniform(-init_scale, init_scale,
                                              size=(3, self.dim))
        self.store.set("emb", np.vstack([special_rows, matrix]), frozen=True)
        self.layers = []
        dim = self.dim
        for k in range(num_layers):
            self.layers.append(LstmLayer(self.store, f"lstm{k}", dim,
                                         hidden_dim, init_scale))
            dim = hidden_dim
        self.store.add("out.W", (hidden_dim, len(self.vocab)), init_scale)
        self.store.add("out.b", (len(self.vocab),), 0.0)

    @property
    def predict_size(self):
        """Support size of every output distribution (<s> is masked out)."""
        return len(self.vocab) - 1

    def ids(self, tokens):
        unk = self.index[UNK]
        # literal sentence markers in running text are malformed input;
        # fold them into <unk> so the masked <s> logit is never a target
        return [unk if w in (SOS, EOS) else self.index.get(w, unk)
                for w in tokens]

    def _mask(self, logits):
        logits[:, self.index[SOS]] = -np.inf
        return logits

    def forward_ids(self, input_ids):
        """Per-step masked logits for a [<s>] + tokens input row."""
        emb = self.store.params["emb"]
        xs = emb[np.asarray(input_ids, dtype=np.intp)]
        caches = []
        for layer in self.layers:
            xs, cache = layer.forward(xs)
            caches.append(cache)
        logits = xs @ self.store.params["out.W"] + self.store.params["out.b"]
        return self._mask(logits), (caches, xs)

    def backward(self, cache, dlogits, grads):
        caches, hs = cache
        grads["out.W"] += hs.T @ dlogits
        grads["out.b"] += dlogits.sum(axis=0)
        d = dlogits @ self.store.params["out.W"].T
        for layer, c in zip(reversed(self.layers), reversed(caches)):
            d = layer.backward(c, d, grads)
        return d

    def sentence_loss(self, tokens, grads=None):
        """Mean next-token cross-entropy; accumulates grads when given."""
        ids = self.ids(tokens)
        inputs = [self.index[SOS]] + ids
        targets = np.array(ids + [self.index[EOS]])
        logits, cache = self.forward_ids(inputs)
        loss, dlogits = softmax_xent(logits, targets)
        if grads is not None:
            self.backward(cache, dlogits, grads)
        return loss, len(targets)

    def sentence_word_logps(self, tokens):
        """Natural-log probability of each token plus the sentence end."""
        ids = self.ids(tokens)
        inputs = [self.index[SOS]] + ids
        targets = ids + [self.index[EOS]]
        logits, _ = self.forward_ids(inputs)
        logp = log_softmax(logits)
        return [float(logp[k, t]) for k, t in enumerate(targets)]

    def step_state(self):
        H = self.hidden_dim
        return [(np.zeros(H), np.zeros(H)) for _ in self.layers]

    def step(self, token_id, state):
        """One incremental step; returns (masked log distribution, state)."""
        x = self.store.params["emb"][token_id]
        new_state = []
        for layer, (h, c) in zip(self.layers, state):
            h, c = layer.step(x, h, c)
            new_state.append((h, c))
            x = h
        logits = x @ self.store.params["out.W"] + self.store.params["out.b"]
        logits[self.index[SOS]] = -np.inf
        return log_softmax(logits[None, :])[0], new_state

    def clone(self):
        words = self.vocab[3:]
        out = RnnLm(words, self.store.params["emb"][3:],
                    hidden_dim=self.hidden_dim, num_layers=self.num_layers,
                    seed=self.store.seed)
        for name in self.store.params:
            out.store.params[name][...] = self.store.params[name]
        out.store.frozen = set(self.store.frozen)
        return out

    def save(self, path, extra=None):
        meta = {"words": self.vocab[3:], "hidden_dim": self.hidden_dim,
                "num_layers": self.num_layers}
        if extra:
            meta.update(extra)
        save_checkpoint(self.store, path, extra=meta)

    @classmethod
    def load(cls, path):
        store, meta = load_checkpoint(path)
        model = cls(meta["words"], store.params["emb"][3:],
                    hidden_dim=meta["hidden_dim"],
                    num_layers=meta["num_layers"], seed=store.seed)
        for name, value in store.params.items():
            model.store.params[name][...] = value
        model.store.frozen = set(store.frozen)
        return model


def train_lm(corpus, embeddings, config):
    """Cross-entropy training with the embedding layer frozen.

    corpus: list of token lists; OOVs map to <unk>.  config keys:
    hidden_dim, num_layers, seed, learning_rate, epochs,
    schedule_threshold, embedding_dim (validated when present).
    The returned model carries per-epoch training perplexities in
    .history.
    """
    corpus = [list(s) for s in corpus]
    if not corpus:
        raise DataError("empty training corpus")
    config = dict(config)
    if "embedding_dim" in config and int(config["embedding_dim"]) != embeddings.dim:
        raise ConfigError(f"embedding dim {embeddings.dim} does not match "
                          f"configured {config['embedding_dim']}")
    model = RnnLm(embeddings.words, embeddings.vectors,
                  hidden_dim=int(config.get("hidden_dim", 64)),
                  num_layers=int(config.get("num_layers", 1)),
                  seed=int(config.get("seed", 0)))
    sched = NewbobSchedule(lr=float(config.get("learning_rate", 4e-5)),
                           threshold=float(config.get("schedule_threshold", 0.5)))
    max_norm = float(config.get("max_grad_norm", 5.0))
    history = []
    for _ in range(int(config.get("epochs", 10))):
        nll = 0.0
        count = 0
        for sent in corpus:
            grads = model.store.zero_grads()
            loss, n = model.sentence_loss(sent, grads)
            nll += loss * n
            count += n
            sgd_step(model.store, grads, sched.lr, max_norm)
        ppl = math.exp(nll / count)
        history.append(ppl)
        sched.update(ppl)
    model.history = history
    return model


def adapt_lm(model, cs_text, config=None):
    """Five further epochs on code-switched text, rate decaying by 0.8 each
    epoch from the configured base; embeddings stay frozen.  Returns an
    adapted copy carrying the rate trace in .adapt_lr_trace."""
    config = dict(config or {})
    cs_text = [list(s) for s in cs_text]
    out = model.clone()
    if not cs_text:
        warnings.warn("empty adaptation text; model returned unchanged")
        out.adapt_lr_trace = []
        return out
    base = float(config.get("learning_rate", 4e-5))
    epochs = int(config.get("epochs", 5))
    decay = float(config.get("decay", 0.8))
    max_norm = float(config.get("max_grad_norm", 5.0))
    trace = []
    for e in range(epochs):
        lr = base * decay ** e
        trace.append(lr)
        for sent in cs_text:
            grads = out.store.zero_grads()
            out.sentence_loss(sent, grads)
            sgd_step(out.store, grads, lr, max_norm)
    out.adapt_lr_trace = trace
    return out


def lm_perplexity(model, text):
    """exp of the mean negative log probability per token including </s>."""
    text = [list(s) for s in text]
    if not text:
        raise DataError("empty evaluation text")
    nll = 0.0
    count = 0
    for sent in text:
        for lp in model.sentence_word_logps(sent):
            nll -= lp
            count += 1
    return math.exp(nll / count)


def generate_text(model, n_sentences, seed, temperature=1.0, max_len=30):
    """Ancestral sampling; each sentence ends at </s> or max_len tokens."""
    if temperature <= 0:
        raise ConfigError("temperature must be positive")
    rng = np.random.default_rng(seed)
    eos = model.index[EOS]
    sentences = []
    for _ in range(n_sentences):
        state = model.step_state()
        token = model.index[SOS]
        words = []
        for _ in range(max_len):
            logp, state = model.step(token, state)
            if temperature != 1.0:
                logp = log_softmax((logp / temperature)[None, :])[0]
            token = int(rng.choice(len(logp), p=np.exp(logp)))
            if token == eos:
                break
            words.append(model.vocab[token])
        sentences.append(words)
    return sentences


def _interp_logp(rnn_lp, ng_lp, weight, space):
    if space == "prob":
        if weight == 1.0:
            return rnn_lp
        if weight == 0.0:
            return ng_lp
        hi = max(rnn_lp, ng_lp)
        return hi + math.log(weight * math.exp(rnn_lp - hi)
                             + (1.0 - weight) * math.exp(ng_lp - hi))
    if space == "loglin":
        return weight * rnn_lp + (1.0 - weight) * ng_lp
    raise ConfigError(f"unknown interpolation space {space!r}")


def rescore_nbest(nbest, model, weight, ngram=None, space="prob"):
    """Replace each hypothesis's LM score by the per-word interpolation of
    the recurrent and n-gram probabilities, then stably re-sort by total.

    Per-word n-gram log probabilities come from the hypotheses when
    annotated, else from the ngram model; absent both is a data error.
    """
    if not 0.0 <= weight <= 1.0:
        raise ConfigError("rescoring weight must lie in [0, 1]")
    rescored = []
    for hyp in nbest:
        ng_lps = hyp.ngram_word_logps
        if ng_lps is None:
            if ngram is None:
                raise DataError(f"hypothesis in {nbest.utt_id} lacks per-word "
                                "scores and no n-gram model was given")
            ng_lps = ngram_word_logps(ngram, hyp.words)
        rnn_lps = model.sentence_word_logps(hyp.words)
        lm = sum(_interp_logp(r, g, weight, space)
                 for r, g in zip(rnn_lps, ng_lps))
        new = type(hyp)(hyp.words, hyp.acoustic, lm, hyp.tag, ng_lps)
        rescored.append(new)
    out = type(nbest)(nbest.utt_id, rescored)
    return out.sorted_copy()
