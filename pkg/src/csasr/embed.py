"""Cross-lingual alignment of two monolingual embedding spaces.

Alternates two halves until the induced dictionary stops changing: an
orthogonal Procrustes solve that maximizes the summed cosine similarity of
the current dictionary pairs, and nearest-neighbor dictionary induction in
the shared space.  Both sides get a map (W_M for the source space, W_N for
the target space); orthogonality keeps every intra-language cosine intact.
"""

import warnings

import numpy as np

from .errors import DataError, ParseError, TrainingError


class EmbeddingSpace:
    """Dense word-to-row vocabulary over a |V| x d matrix."""

    def __init__(self, words, vectors, state="raw"):
        self.words = list(words)
        self.vectors = np.asarray(vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.words):
            raise DataError(f"vector matrix shape {self.vectors.shape} does "
                            f"not match vocabulary size {len(self.words)}")
        self.index = {}
        for i, w in enumerate(self.words):
            if w in self.index:
                raise DataError(f"duplicate word {w!r}")
            self.index[w] = i
        self.state = state

    @property
    def dim(self):
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.words)


class TranslationDictionary:
    """Ordered (source row, target row) pairs; source rows unique."""

    def __init__(self, pairs):
        self.pairs = [(int(i), int(j)) for i, j in pairs]
        seen = set()
        for i, _ in self.pairs:
            if i in seen:
                raise DataError(f"duplicate source index {i} in dictionary")
            seen.add(i)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __eq__(self, other):
        return isinstance(other, TranslationDictionary) and self.pairs == other.pairs

    def source_rows(self):
        return [i for i, _ in self.pairs]


def normalize(space):
    """Mean-center per dimension, then scale every row to unit length."""
    for i, row in enumerate(space.vectors):
        if np.linalg.norm(row) == 0.0:
            raise DataError(f"zero embedding row for word {space.words[i]!r}")
    centered = space.vectors - space.vectors.mean(axis=0, keepdims=True)
    norms = np.linalg.norm(centered, axis=1, keepdims=True)
    for i, n in enumerate(norms[:, 0]):
        if n == 0.0:
            raise DataError(f"word {space.words[i]!r} vanishes after centering")
    return EmbeddingSpace(space.words, centered / norms, state="centered_unit")


def _require_unit_rows(space, name):
    norms = np.linalg.norm(space.vectors, axis=1)
    if np.max(np.abs(norms - 1.0)) > 1e-6:
        raise DataError(f"{name} space is not normalized")


def procrustes_step(m, n, dictionary):
    """Orthogonal maps (W_M, W_N, objective) maximizing the summed cosine
    of dictionary pairs; objective equals the singular value sum of the
    pair cross-covariance."""
    _require_unit_rows(m, "source")
    _require_unit_rows(n, "target")
    if len(dictionary) == 0:
        raise DataError("empty dictionary")
    rows_m = np.array([i for i, _ in dictionary])
    rows_n = np.array([j for _, j in dictionary])
    cross = m.vectors[rows_m].T @ n.vectors[rows_n]
    u, sv, vt = np.linalg.svd(cross)
    if np.sum(sv > 1e-12 * sv[0]) < cross.shape[0]:
        warnings.warn("rank-deficient dictionary cross-covariance; "
                      "rotation is not unique")
    return u, vt.T, float(np.sum(sv))


def apply_mapping(space, w):
    """Rotate a space into the shared coordinates; unit rows stay unit."""
    return EmbeddingSpace(space.words, space.vectors @ w, state=space.state)


def _matrix_of(space_or_matrix):
    if isinstance(space_or_matrix, EmbeddingSpace):
        return space_or_matrix.vectors
    return np.asarray(space_or_matrix, dtype=np.float64)


def induce_dictionary(m_mapped, n_mapped, mode="forward"):
    """Nearest-target pairs by cosine for every source row; mutual mode
    keeps only pairs that are each other's nearest neighbor.  argmax takes
    the lowest index on ties."""
    mv = _matrix_of(m_mapped)
    nv = _matrix_of(n_mapped)
    if mode not in ("forward", "mutual"):
        raise DataError(f"unknown induction mode {mode!r}")
    if mv.shape[0] == 0 or nv.shape[0] == 0:
        if mode == "mutual":
            raise DataError("no mutual pairs")
        return TranslationDictionary([])
    sims = mv @ nv.T
    fwd = np.argmax(sims, axis=1)
    if mode == "forward":
        return TranslationDictionary(list(enumerate(fwd)))
    bwd = np.argmax(sims, axis=0)
    pairs = [(i, j) for i, j in enumerate(fwd) if bwd[j] == i]
    if not pairs:
        raise DataError("no mutual pairs")
    return TranslationDictionary(pairs)


def self_learn(m, n, seed_dict, config=None):
    """Alternate Procrustes solves and induction until the dictionary is
    stable.  Returns (W_M, W_N, dictionary, objective trace); the trace
    records objectives of iterations whose dictionary covers every source
    row, the regime where each half-step cannot decrease the objective."""
    config = dict(config or {})
    max_iters = int(config.get("max_iters", 20))
    mode = config.get("mode", "forward")
    if len(seed_dict) == 0:
        raise DataError("empty seed dictionary")
    _require_unit_rows(m, "source")
    _require_unit_rows(n, "target")

    dictionary = seed_dict
    trace = []
    w_m = np.eye(m.dim)
    w_n = np.eye(n.dim)
    for _ in range(max_iters):
        w_m, w_n, objective = procrustes_step(m, n, dictionary)
        if len(dictionary) == len(m):
            trace.append(objective)
        try:
            induced = induce_dictionary(m.vectors @ w_m, n.vectors @ w_n, mode)
        except DataError as exc:
            raise TrainingError(f"dictionary collapsed: {exc}")
        if induced == dictionary:
            break
        dictionary = induced
    return w_m, w_n, dictionary, trace


def seed_dictionary(m, n):
    """Pairs of identical surface forms across the two vocabularies."""
    pairs = [(m.index[w], n.index[w]) for w in m.words if w in n.index]
    if not pairs:
        raise DataError("vocabularies share no surface forms; provide a "
                        "manual seed dictionary file")
    return TranslationDictionary(pairs)


def dictionary_accuracy(dictionary, truth):
    """Fraction of source rows whose induced target matches the reference."""
    gold = dict(truth)
    if not gold:
        raise DataError("empty reference dictionary")
    hits = sum(1 for i, j in dictionary if gold.get(i) == j)
    return hits / len(gold)


def train_embeddings(sentences, dim, window=2, min_count=1):
    """Co-occurrence embeddings for synthetic text: positive PMI of windowed
    counts, factored by SVD, rows scaled by the singular value root.  Small
    corpora only; real embedding training is out of scope."""
    counts = {}
    for sent in sentences:
        for w in sent:
            counts[w] = counts.get(w, 0) + 1
    words = sorted((w for w, c in counts.items() if c >= min_count),
                   key=lambda w: (-counts[w], w))
    if not words:
        raise DataError("no words above the frequency cutoff")
    index = {w: i for i, w in enumerate(words)}
    V = len(words)
    co = np.zeros((V, V))
    for sent in sentences:
        ids = [index.get(w, -1) for w in sent]
        for a, ia in enumerate(ids):
            if ia < 0:
                continue
            lo = max(0, a - window)
            hi = min(len(ids), a + window + 1)
            for b in range(lo, hi):
                if b != a and ids[b] >= 0:
                    co[ia, ids[b]] += 1.0
    total = co.sum()
    if total == 0:
        raise DataError("no co-occurrences; sentences too short")
    row = co.sum(axis=1, keepdims=True)
    col = co.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        pmi = np.log(co * total / (row @ col))
    ppmi = np.where(np.isfinite(pmi) & (pmi > 0), pmi, 0.0)
    u, sv, _ = np.linalg.svd(ppmi)
    dim = min(dim, V)
    vectors = u[:, :dim] * np.sqrt(sv[:dim])
    return EmbeddingSpace(words, vectors, state="raw")


def write_embeddings(path, space):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(space)} {space.dim}\n")
        for w, row in zip(space.words, space.vectors):
            fh.write(w + " " + " ".join(repr(float(v)) for v in row) + "\n")


def read_embeddings(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    if not lines:
        raise ParseError("empty embedding file", line=1)
    head = lines[0].split()
    if len(head) != 2:
        raise ParseError(f"bad header {lines[0]!r}", line=1)
    try:
        V, d = int(head[0]), int(head[1])
    except ValueError:
        raise ParseError(f"bad header {lines[0]!r}", line=1)
    if len(lines) - 1 != V:
        raise ParseError(f"expected {V} rows, found {len(lines) - 1}", line=len(lines))
    words = []
    vectors = np.zeros((V, d))
    for k, line in enumerate(lines[1:]):
        parts = line.split()
        if len(parts) != d + 1:
            raise ParseError(f"expected {d} values", line=k + 2)
        words.append(parts[0])
        try:
            vectors[k] = [float(v) for v in parts[1:]]
        except ValueError:
            raise ParseError("non-numeric embedding value", line=k + 2)
    return EmbeddingSpace(words, vectors, state="raw")


def write_dictionary(path, word_pairs):
    with open(path, "w", encoding="utf-8") as fh:
        for src, tgt in word_pairs:
            fh.write(f"{src}\t{tgt}\n")


def read_dictionary(path):
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise ParseError("expected src<TAB>tgt", line=lineno)
            pairs.append((parts[0], parts[1]))
    return pairs


def words_to_rows(m, n, word_pairs):
    """Surface-form pairs to row pairs, rejecting unknown words."""
    rows = []
    for src, tgt in word_pairs:
        if src not in m.index:
            raise DataError(f"unknown source word {src!r}")
        if tgt not in n.index:
            raise DataError(f"unknown target word {tgt!r}")
        rows.append((m.index[src], n.index[tgt]))
    return TranslationDictionary(rows)
