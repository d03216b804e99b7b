"""Back-off n-gram language models with interpolated Kneser-Ney smoothing.

Models are stored ARPA-style: each seen gram carries a base-10 log
probability and, when it acts as a context, a base-10 log back-off weight.
Scoring pads with <s>/</s>, maps unseen words to <unk>, and never predicts
<s> (its stored probability is the conventional -99 floor).  Counts below
the top order are continuation counts (number of distinct left extensions)
except for grams starting with <s>, which keep raw counts since nothing
can precede them.  Probability interpolation of two models re-derives
back-off weights from the leftover-mass ratio so normalization survives.
"""

import math
from collections import Counter

from .errors import ConfigError, DataError, ParseError

SOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

LOG10_FLOOR = -99.0
LN10 = math.log(10.0)


class ArpaModel:
    """order-n back-off model; ngrams[k-1] maps k-tuples to [logp, logbow|None]."""

    def __init__(self, order):
        self.order = order
        self.ngrams = [dict() for _ in range(order)]
        self.vocab = set()

    def counts(self):
        return [len(d) for d in self.ngrams]

    def _map_word(self, w):
        if w in self.vocab:
            return w
        if UNK in self.vocab:
            return UNK
        raise DataError(f"word {w!r} outside a closed vocabulary with no {UNK}")

    def logp10(self, word, history=()):
        """Base-10 conditional log probability with back-off."""
        word = self._map_word(word)
        hist = tuple(self._map_word(h) for h in history)
        keep = self.order - 1
        if len(hist) > keep:
            hist = hist[len(hist) - keep:]
        return self._query(word, hist)

    def _query(self, word, hist):
        gram = hist + (word,)
        entry = self.ngrams[len(gram) - 1].get(gram)
        if entry is not None:
            return entry[0]
        if not hist:
            raise DataError(f"no unigram entry for {word!r}")
        ctx = self.ngrams[len(hist) - 1].get(hist)
        bow = ctx[1] if ctx is not None and ctx[1] is not None else 0.0
        return bow + self._query(word, hist[1:])

    def cond_logp(self, word, history=()):
        """Natural-log conditional probability."""
        return self.logp10(word, history) * LN10


def _normalize_corpus(corpus):
    lines = []
    for line in corpus:
        if isinstance(line, str):
            toks = line.split()
        else:
            toks = list(line)
        if toks:
            for t in toks:
                if t in (SOS, EOS):
                    raise DataError(f"corpus line contains reserved token {t!r}")
            lines.append(toks)
    return lines


def _estimate_discount(counts):
    n1 = sum(1 for c in counts.values() if c == 1)
    n2 = sum(1 for c in counts.values() if c == 2)
    if n1 == 0:
        return 0.5
    return min(n1 / (n1 + 2.0 * n2), 1.0)


def train_kn(corpus, order, discount=None, closed_vocab=False):
    """Estimate an interpolated Kneser-Ney model of the given order.

    corpus: token lines (lists of words or whitespace-joined strings).
    discount: optional per-order absolute discounts in [0, 1); estimated
    from count-of-counts as n1/(n1 + 2*n2) per order when omitted.
    Open-vocabulary models reserve unigram mass for <unk>.
    """
    if not 1 <= order <= 4:
        raise ConfigError(f"order must be in [1, 4], got {order}")
    lines = _normalize_corpus(corpus)
    if not lines:
        raise DataError("empty corpus")
    if discount is not None:
        discount = list(discount)
        if len(discount) != order:
            raise ConfigError(f"need {order} discounts, got {len(discount)}")
        for d in discount:
            if not 0.0 <= d < 1.0:
                raise ConfigError(f"discount {d} outside [0, 1)")

    words = set()
    raw = [Counter() for _ in range(order)]
    for toks in lines:
        words.update(toks)
        padded = [SOS] + toks + [EOS]
        for k in range(1, order + 1):
            for i in range(len(padded) - k + 1):
                raw[k - 1][tuple(padded[i:i + k])] += 1

    # continuation counts below the top order; <s>-initial grams keep raw
    # counts because no word can precede <s>
    level = [None] * order
    level[order - 1] = raw[order - 1]
    for k in range(order - 1, 0, -1):
        cont = Counter()
        for gram in raw[k]:
            cont[gram[1:]] += 1
        cc = Counter()
        for gram, c in raw[k - 1].items():
            cc[gram] = c if gram[0] == SOS else cont.get(gram, 0)
        level[k - 1] = cc

    if discount is None:
        discount = [_estimate_discount(level[k]) for k in range(order)]

    model = ArpaModel(order)
    predict = sorted(words | {EOS} | (set() if closed_vocab else {UNK}))
    model.vocab = set(predict) | {SOS}

    d1 = discount[0]
    cc = level[0]
    total = float(sum(cc.get((w,), 0) for w in predict))
    if total <= 0:
        raise DataError("no unigram mass in corpus")
    n1plus = sum(1 for w in predict if cc.get((w,), 0) > 0)
    uniform = 1.0 / len(predict)
    probs = {}
    for w in predict:
        c = cc.get((w,), 0)
        p = max(c - d1, 0.0) / total + d1 * n1plus / total * uniform
        probs[(w,)] = p
        model.ngrams[0][(w,)] = [math.log10(max(p, 1e-99)), None]
    model.ngrams[0][(SOS,)] = [LOG10_FLOOR, None]

    for k in range(2, order + 1):
        dk = discount[k - 1]
        counts = level[k - 1]
        by_ctx = {}
        for gram, c in counts.items():
            if c > 0:
                by_ctx.setdefault(gram[:-1], []).append((gram, c))
        for ctx in sorted(by_ctx):
            entries = by_ctx[ctx]
            tot = float(sum(c for _, c in entries))
            n1p = len(entries)
            gamma = dk * n1p / tot
            ctx_entry = model.ngrams[k - 2].get(ctx)
            if ctx_entry is None:
                raise DataError(f"context {ctx!r} missing at order {k - 1}")
            ctx_entry[1] = math.log10(max(gamma, 1e-99))
            for gram, c in entries:
                lower = probs[gram[1:]]
                p = max(c - dk, 0.0) / tot + gamma * lower
                probs[gram] = p
                model.ngrams[k - 1][gram] = [math.log10(max(p, 1e-99)), None]
    return model


def score_sentence(model, tokens):
    """Natural-log probability of a token line, padded with <s> and </s>."""
    if isinstance(tokens, str):
        tokens = tokens.split()
    total = 0.0
    hist = (SOS,)
    for w in list(tokens) + [EOS]:
        total += model.logp10(w, hist)
        hist = hist + (model._map_word(w),)
    return total * LN10


def sentence_word_logps(model, tokens):
    """Per-word natural-log conditional probabilities, </s> included."""
    if isinstance(tokens, str):
        tokens = tokens.split()
    out = []
    hist = (SOS,)
    for w in list(tokens) + [EOS]:
        out.append(model.logp10(w, hist) * LN10)
        hist = hist + (model._map_word(w),)
    return out


def perplexity(model, corpus):
    """exp of negated mean per-token log probability; </s> counts as a token."""
    lines = _normalize_corpus(corpus)
    if not lines:
        raise DataError("empty evaluation corpus")
    total = 0.0
    tokens = 0
    for toks in lines:
        total += score_sentence(model, toks)
        tokens += len(toks) + 1
    return math.exp(-total / tokens)


def _copy_model(lm):
    out = ArpaModel(lm.order)
    out.vocab = set(lm.vocab)
    for k in range(lm.order):
        out.ngrams[k] = {g: list(e) for g, e in lm.ngrams[k].items()}
    return out


def interpolate(lm1, lm2, weight):
    """Probability-space mixture: p = weight*p1 + (1-weight)*p2.

    The union of seen grams gets explicit probabilities, each side scored
    with its own back-off; back-off weights are recomputed per context as
    leftover mass over leftover lower-order mass, which keeps every
    context's distribution normalized.  When the vocabularies differ, each
    side's <unk> probability is shared uniformly between <unk> and the
    words only the other model knows, so the union stays a distribution;
    the exact endpoints return a copy of the corresponding input, making
    endpoint scores identical to it.
    """
    if not 0.0 <= weight <= 1.0:
        raise ConfigError(f"interpolation weight {weight} outside [0, 1]")
    if weight == 1.0:
        return _copy_model(lm1)
    if weight == 0.0:
        return _copy_model(lm2)
    order = max(lm1.order, lm2.order)
    out = ArpaModel(order)
    out.vocab = set(lm1.vocab) | set(lm2.vocab)

    predict1 = {g[0] for g in lm1.ngrams[0]} - {SOS}
    predict2 = {g[0] for g in lm2.ngrams[0]} - {SOS}
    union_predict = predict1 | predict2
    share1 = 1.0 / (1 + len(union_predict - predict1))
    share2 = 1.0 / (1 + len(union_predict - predict2))

    def side(lm, predict, share, word, hist):
        if word in predict and word != UNK:
            return 10.0 ** lm.logp10(word, hist)
        if UNK not in predict:
            return 0.0
        return share * 10.0 ** lm.logp10(UNK, hist)

    def mix(word, hist):
        return (weight * side(lm1, predict1, share1, word, hist)
                + (1.0 - weight) * side(lm2, predict2, share2, word, hist))

    for k in range(1, order + 1):
        grams = set()
        if k <= lm1.order:
            grams.update(lm1.ngrams[k - 1])
        if k <= lm2.order:
            grams.update(lm2.ngrams[k - 1])
        for gram in sorted(grams):
            word, hist = gram[-1], gram[:-1]
            if word == SOS and k == 1:
                out.ngrams[0][gram] = [LOG10_FLOOR, None]
                continue
            p = mix(word, hist)
            out.ngrams[k - 1][gram] = [math.log10(max(p, 1e-99)), None]
        if k == 1:
            continue
        by_ctx = {}
        for gram in out.ngrams[k - 1]:
            by_ctx.setdefault(gram[:-1], []).append(gram[-1])
        for ctx, ws in sorted(by_ctx.items()):
            entry = out.ngrams[k - 2].get(ctx)
            if entry is None:
                entry = [LOG10_FLOOR, None]
                out.ngrams[k - 2][ctx] = entry
            num = 1.0 - math.fsum(10.0 ** out.ngrams[k - 1][ctx + (w,)][0] for w in ws)
            den = 1.0 - math.fsum(10.0 ** out._query(w, ctx[1:]) for w in ws)
            if den <= 1e-12:
                bow = 1.0
            else:
                bow = max(num, 0.0) / den
            entry[1] = math.log10(max(bow, 1e-99))
    return out


def write_arpa(model, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write("\\data\\\n")
        for k in range(1, model.order + 1):
            f.write(f"ngram {k}={len(model.ngrams[k - 1])}\n")
        f.write("\n")
        for k in range(1, model.order + 1):
            f.write(f"\\{k}-grams:\n")
            for gram in sorted(model.ngrams[k - 1]):
                logp, bow = model.ngrams[k - 1][gram]
                line = f"{logp:.6f}\t{' '.join(gram)}"
                if bow is not None:
                    line += f"\t{bow:.6f}"
                f.write(line + "\n")
            f.write("\n")
        f.write("\\end\\\n")


def read_arpa(path):
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    counts = {}
    i = 0
    n = len(lines)
    while i < n and lines[i].strip() != "\\data\\":
        if lines[i].strip():
            raise ParseError("expected \\data\\ header", line=i + 1)
        i += 1
    if i == n:
        raise ParseError("missing \\data\\ header")
    i += 1
    while i < n:
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        if line.startswith("\\"):
            break
        if not line.startswith("ngram "):
            raise ParseError(f"bad count line {line!r}", line=i + 1)
        try:
            k, c = line[len("ngram "):].split("=")
            counts[int(k)] = int(c)
        except ValueError:
            raise ParseError(f"bad count line {line!r}", line=i + 1)
        i += 1
    if not counts or sorted(counts) != list(range(1, max(counts) + 1)):
        raise ParseError("order list in \\data\\ section is not 1..n")
    order = max(counts)
    model = ArpaModel(order)
    seen_end = False
    while i < n:
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        if line == "\\end\\":
            seen_end = True
            i += 1
            continue
        m = line.removeprefix("\\").removesuffix("-grams:")
        if not line.startswith("\\") or not line.endswith("-grams:") or not m.isdigit():
            raise ParseError(f"expected section header, got {line!r}", line=i + 1)
        k = int(m)
        if not 1 <= k <= order:
            raise ParseError(f"section order {k} outside declared range", line=i + 1)
        i += 1
        while i < n and lines[i].strip() and not lines[i].strip().startswith("\\"):
            parts = lines[i].split()
            if len(parts) == k + 1:
                bow = None
            elif len(parts) == k + 2:
                bow = parts[-1]
            else:
                raise ParseError(f"expected {k}-gram entry, got {lines[i]!r}", line=i + 1)
            try:
                logp = float(parts[0])
                bow = float(bow) if bow is not None else None
            except ValueError:
                raise ParseError(f"bad log value in {lines[i]!r}", line=i + 1)
            gram = tuple(parts[1:k + 1])
            model.ngrams[k - 1][gram] = [logp, bow]
            i += 1
    if not seen_end:
        raise ParseError("missing \\end\\ marker")
    for k in range(1, order + 1):
        if len(model.ngrams[k - 1]) != counts[k]:
            raise ParseError(
                f"\\data\\ declares {counts[k]} {k}-grams, found {len(model.ngrams[k - 1])}")
    model.vocab = {g[0] for g in model.ngrams[0]}
    return model
