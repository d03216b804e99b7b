"""Synthetic bilingual text and audio stand-in.

Two toy languages ("alpha", "beta") draw words from disjoint character
inventories; a small shared vocabulary is spelled from a third inventory
so every shared word exists in both languages verbatim.  Monolingual
sentences follow per-language bigram templates (each word owns a fixed
successor list drawn once per corpus seed), and code-switched sentences
flip language at each word boundary with a configured probability.
Acoustic features are emitted per character unit by the same synthetic
process the acoustic model trains on.
"""

import numpy as np

from .ctc import make_unit_means, synth_features
from .errors import ConfigError, DataError
from .graph import BLANK_SYM, Lexicon

LANG_A = "alpha"
LANG_B = "beta"
SHARED = "shared"

ALPHA_CHARS = "bdfgklmn"
BETA_CHARS = "prstvwyz"
SHARED_CHARS = "0123456789"


class SyntheticCorpusSpec:
    """Knobs for one corpus; seed is mandatory."""

    def __init__(self, seed, words_per_lang=200, shared_words=30,
                 alpha_chars=ALPHA_CHARS, beta_chars=BETA_CHARS,
                 shared_chars=SHARED_CHARS, min_word_len=2, max_word_len=4,
                 min_sent_len=3, max_sent_len=7, branch=12,
                 mono_a=400, mono_b=400, b10_factor=10, cs_train=300,
                 test_mono_a=18, test_mono_b=18, test_cs=36, switch_prob=0.3,
                 am_utts=120, feat_dim=12, noise=0.3, min_dwell=2,
                 max_dwell=4):
        self.seed = int(seed)
        self.words_per_lang = int(words_per_lang)
        self.shared_words = int(shared_words)
        self.alpha_chars = str(alpha_chars)
        self.beta_chars = str(beta_chars)
        self.shared_chars = str(shared_chars)
        self.min_word_len = int(min_word_len)
        self.max_word_len = int(max_word_len)
        self.min_sent_len = int(min_sent_len)
        self.max_sent_len = int(max_sent_len)
        self.branch = int(branch)
        self.mono_a = int(mono_a)
        self.mono_b = int(mono_b)
        self.b10_factor = int(b10_factor)
        self.cs_train = int(cs_train)
        self.test_mono_a = int(test_mono_a)
        self.test_mono_b = int(test_mono_b)
        self.test_cs = int(test_cs)
        self.switch_prob = float(switch_prob)
        self.am_utts = int(am_utts)
        self.feat_dim = int(feat_dim)
        self.noise = float(noise)
        self.min_dwell = int(min_dwell)
        self.max_dwell = int(max_dwell)
        self._validate()

    def _validate(self):
        if not 0.0 <= self.switch_prob <= 1.0:
            raise ConfigError(f"switch_prob {self.switch_prob} outside [0, 1]")
        pools = {"alpha_chars": set(self.alpha_chars),
                 "beta_chars": set(self.beta_chars),
                 "shared_chars": set(self.shared_chars)}
        for name, chars in pools.items():
            if not chars:
                raise ConfigError(f"{name} is empty")
        names = list(pools)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                hit = pools[a] & pools[b]
                if hit:
                    raise ConfigError(
                        f"character inventories {a} and {b} collide on "
                        f"{sorted(hit)}; only the shared word list may "
                        "overlap between languages")
        if self.words_per_lang < 1 or self.shared_words < 1:
            raise ConfigError("need at least one word per language and one "
                              "shared word")
        if not 1 <= self.min_word_len <= self.max_word_len:
            raise ConfigError("bad word length bounds")
        if not 1 <= self.min_sent_len <= self.max_sent_len:
            raise ConfigError("bad sentence length bounds")
        if self.branch < 1:
            raise ConfigError("branch must be positive")
        if min(self.mono_a, self.mono_b, self.cs_train, self.test_cs) < 1:
            raise ConfigError("corpus sizes must be positive")


class CorpusBundle:
    """Everything one experiment consumes: text, lexicon, units, audio."""

    def __init__(self, spec, words_a, words_b, words_shared, corpora, test,
                 am_train, features, labels, unit_means):
        self.spec = spec
        self.words_a = words_a
        self.words_b = words_b
        self.words_shared = words_shared
        self.corpora = corpora
        self.test = test
        self.am_train = am_train
        self.features = features
        self.labels = labels
        self.unit_means = unit_means
        word_lang = {w: LANG_A for w in words_a}
        word_lang.update({w: LANG_B for w in words_b})
        word_lang.update({w: SHARED for w in words_shared})
        self.lexicon = Lexicon.from_words(word_lang)
        self.word_lang = word_lang
        self.units = [BLANK_SYM] + sorted(spec.alpha_chars) \
            + sorted(spec.beta_chars) + sorted(spec.shared_chars)
        self.unit_id = {u: i for i, u in enumerate(self.units)}

    def label_ids(self, words):
        out = []
        for w in words:
            out.extend(self.unit_id[c] for c in w)
        return out


def _make_words(rng, chars, count, lmin, lmax, taken=()):
    chars = sorted(chars)
    words = []
    seen = set(taken)
    for _ in range(count * 400):
        if len(words) == count:
            break
        length = int(rng.integers(lmin, lmax + 1))
        w = "".join(chars[int(rng.integers(0, len(chars)))]
                    for _ in range(length))
        if w not in seen:
            seen.add(w)
            words.append(w)
    if len(words) < count:
        raise ConfigError(f"cannot draw {count} distinct words of length "
                          f"{lmin}..{lmax} from {''.join(chars)!r}")
    return sorted(words)


def _make_chain(rng, pool, branch):
    starts = [pool[int(i)] for i in rng.integers(0, len(pool),
                                                 size=max(2 * branch, 8))]
    succ = {w: [pool[int(i)] for i in rng.integers(0, len(pool), size=branch)]
            for w in pool}
    return starts, succ


def _pick(rng, items):
    return items[int(rng.integers(0, len(items)))]


def _mono_sentence(rng, chain, lmin, lmax):
    starts, succ = chain
    n = int(rng.integers(lmin, lmax + 1))
    out = [_pick(rng, starts)]
    for _ in range(n - 1):
        out.append(_pick(rng, succ[out[-1]]))
    return out


def _cs_sentence(rng, chains, lmin, lmax, switch_prob):
    lang = LANG_A if rng.random() < 0.5 else LANG_B
    n = int(rng.integers(lmin, lmax + 1))
    out = [_pick(rng, chains[lang][0])]
    for _ in range(n - 1):
        if rng.random() < switch_prob:
            lang = LANG_B if lang == LANG_A else LANG_A
            out.append(_pick(rng, chains[lang][0]))
        else:
            out.append(_pick(rng, chains[lang][1][out[-1]]))
    return out


def gen_corpus(spec):
    rng = np.random.default_rng(spec.seed)
    words_shared = _make_words(rng, spec.shared_chars, spec.shared_words,
                               spec.min_word_len, spec.max_word_len)
    words_a = _make_words(rng, spec.alpha_chars, spec.words_per_lang,
                          spec.min_word_len, spec.max_word_len, words_shared)
    words_b = _make_words(rng, spec.beta_chars, spec.words_per_lang,
                          spec.min_word_len, spec.max_word_len, words_shared)
    pool_a = sorted(words_a + words_shared)
    pool_b = sorted(words_b + words_shared)
    chains = {LANG_A: _make_chain(rng, pool_a, spec.branch),
              LANG_B: _make_chain(rng, pool_b, spec.branch)}

    def mono(lang, count):
        return [_mono_sentence(rng, chains[lang], spec.min_sent_len,
                               spec.max_sent_len) for _ in range(count)]

    def mixed(count):
        return [_cs_sentence(rng, chains, spec.min_sent_len,
                             spec.max_sent_len, spec.switch_prob)
                for _ in range(count)]

    corpora = {
        "mono_a": mono(LANG_A, spec.mono_a),
        "mono_b": mono(LANG_B, spec.mono_b),
        "mono_b10": mono(LANG_B, spec.mono_b * spec.b10_factor),
        "cs_train": mixed(spec.cs_train),
    }
    test = []
    for i, sent in enumerate(mono(LANG_A, spec.test_mono_a)):
        test.append((f"ta-{i:03d}", sent))
    for i, sent in enumerate(mono(LANG_B, spec.test_mono_b)):
        test.append((f"tb-{i:03d}", sent))
    for i, sent in enumerate(mixed(spec.test_cs)):
        test.append((f"tc-{i:03d}", sent))

    am_pool = []
    splits = (mono(LANG_A, spec.am_utts), mono(LANG_B, spec.am_utts),
              mixed(spec.am_utts))
    for k in range(spec.am_utts):
        am_pool.append(splits[k % 3][k])
    am_train = [(f"am-{i:03d}", sent) for i, sent in enumerate(am_pool)]

    bundle = CorpusBundle(spec, words_a, words_b, words_shared, corpora,
                          test, am_train, {}, {}, None)
    num_units = len(bundle.units) - 1
    bundle.unit_means = make_unit_means(num_units, spec.feat_dim,
                                        seed=spec.seed + 1)
    feat_rng = np.random.default_rng(spec.seed + 2)
    for utt_id, words in am_train + test:
        labels = bundle.label_ids(words)
        bundle.labels[utt_id] = labels
        bundle.features[utt_id] = synth_features(
            labels, bundle.unit_means, feat_rng, min_dwell=spec.min_dwell,
            max_dwell=spec.max_dwell, noise=spec.noise)
    return bundle


def switch_rate(sentences, word_lang):
    """Fraction of language-decisive adjacent word pairs that differ in
    language.  Pairs touching shared words are skipped, which keeps the
    estimate an unbiased read of the per-boundary switch probability."""
    switches = 0
    pairs = 0
    for sent in sentences:
        for u, v in zip(sent, sent[1:]):
            lu = word_lang.get(u)
            lv = word_lang.get(v)
            if lu in (LANG_A, LANG_B) and lv in (LANG_A, LANG_B):
                pairs += 1
                if lu != lv:
                    switches += 1
    if pairs == 0:
        raise DataError("no language-decisive word pairs to measure")
    return switches / pairs


def write_sentences(path, sentences):
    with open(path, "w", encoding="utf-8") as fh:
        for sent in sentences:
            fh.write(" ".join(sent) + "\n")


def read_sentences(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            toks = line.split()
            if toks:
                out.append(toks)
    return out


def write_transcripts(path, pairs):
    """Reference format: one 'utt_id word word ...' line per utterance."""
    with open(path, "w", encoding="utf-8") as fh:
        for utt_id, words in pairs:
            fh.write(utt_id + " " + " ".join(words) + "\n")


def read_transcripts(path):
    out = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            toks = line.split()
            if not toks:
                continue
            if toks[0] in seen:
                raise DataError(f"duplicate utterance id {toks[0]!r} "
                                f"at line {ln}")
            seen.add(toks[0])
            out.append((toks[0], toks[1:]))
    return out
