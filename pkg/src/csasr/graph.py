"""Decoding-graph construction: token, lexicon, and grammar transducers.

The search graph is connect(T o (L o G)) in the tropical semiring.  T maps
framewise symbol paths (with blanks and repeats) to collapsed unit
strings, L spells words as unit sequences, and G is the n-gram acceptor
with back-off epsilon arcs.  A multi-graph union prefixes each component
with an epsilon-input arc that emits a reserved "#tag:<name>" output
symbol, so every decoded hypothesis carries the identity of the subgraph
it came from.
"""

import math
from dataclasses import dataclass, field

from .errors import ConfigError, DataError, ParseError
from .fst import EPSILON, TROPICAL, Fst, SymbolTable, compose, connect, union
from .ngram import EOS, LN10, SOS, UNK, ArpaModel

BLANK_SYM = "<blk>"
TAG_PREFIX = "#tag:"


@dataclass
class GraphTag:
    name: str

    def __post_init__(self):
        if not self.name or any(c.isspace() for c in self.name):
            raise ConfigError(f"tag name {self.name!r} must be non-empty without spaces")

    @property
    def symbol(self):
        return TAG_PREFIX + self.name


@dataclass
class Lexicon:
    """Pronunciation entries (word, language, unit sequence)."""

    entries: list = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for word, lang, units in self.entries:
            if not units:
                raise DataError(f"word {word!r} has an empty unit sequence")
            if word in seen:
                raise DataError(f"duplicate lexicon entry for {word!r}")
            seen.add(word)

    @property
    def words(self):
        return [e[0] for e in self.entries]

    @property
    def word_lang(self):
        return {w: lang for w, lang, _ in self.entries}

    def units_of(self, word):
        for w, _, units in self.entries:
            if w == word:
                return units
        raise ConfigError(f"word {word!r} not in lexicon")

    @classmethod
    def from_words(cls, word_lang):
        """Character lexicon: each word is spelled by its characters."""
        entries = [(w, lang, tuple(w)) for w, lang in word_lang.items()]
        entries.sort()
        return cls(entries)

    def write(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for word, lang, units in self.entries:
                f.write(f"{word}\t{lang}\t{' '.join(units)}\n")

    @classmethod
    def read(cls, path):
        entries = []
        with open(path, encoding="utf-8") as f:
            for ln, line in enumerate(f, 1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ParseError(f"expected 'word<TAB>lang<TAB>units': {line!r}", line=ln)
                word, lang, units = parts
                units = tuple(units.split())
                if not units:
                    raise ParseError(f"empty unit sequence for {word!r}", line=ln)
                entries.append((word, lang, units))
        try:
            return cls(entries)
        except DataError as e:
            raise ParseError(str(e))


def read_units(path):
    units = []
    with open(path, encoding="utf-8") as f:
        for ln, line in enumerate(f, 1):
            tok = line.strip()
            if tok:
                units.append(tok)
    if not units or units[0] != BLANK_SYM:
        raise ParseError(f"unit inventory must start with {BLANK_SYM}")
    if len(set(units)) != len(units):
        raise ParseError("duplicate units in inventory")
    return units


def write_units(units, path):
    with open(path, "w", encoding="utf-8") as f:
        for u in units:
            f.write(u + "\n")


def build_token_fst(units):
    """Framewise-path to unit-string transducer.

    units: full inventory, blank first.  The start state absorbs blanks;
    each unit has a state that absorbs its own repeats, emits the unit on
    entry, and returns through blank or switches directly to a different
    unit.  Every state is final, so any framewise path maps to exactly the
    blank-removed, repeat-collapsed unit string.
    """
    if not units or units[0] != BLANK_SYM:
        raise ConfigError(f"unit inventory must start with {BLANK_SYM}")
    if len(units) < 2:
        raise ConfigError("unit inventory needs at least one non-blank unit")
    if len(set(units)) != len(units):
        raise ConfigError("duplicate units in inventory")
    isyms = SymbolTable(units)
    osyms = SymbolTable(units[1:])
    t = Fst(TROPICAL, isyms, osyms)
    start = t.add_state()
    t.set_start(start)
    t.set_final(start)
    blank = isyms.id(BLANK_SYM)
    t.add_arc(start, start, blank, EPSILON)
    unit_state = {}
    for u in units[1:]:
        s = t.add_state()
        unit_state[u] = s
        t.set_final(s)
    for u in units[1:]:
        s = unit_state[u]
        uid = isyms.id(u)
        oid = osyms.id(u)
        t.add_arc(start, s, uid, oid)
        t.add_arc(s, s, uid, EPSILON)
        t.add_arc(s, start, blank, EPSILON)
        for v in units[1:]:
            if v != u:
                t.add_arc(s, unit_state[v], isyms.id(v), osyms.id(v))
    return t


def build_lexicon_fst(lexicon, units):
    """Unit-string to word-string transducer, closed over word sequences.

    The word label is emitted on the first unit of its spelling so no
    epsilon arcs are needed; remaining units ride epsilon outputs back to
    the shared root, which is both start and final.
    """
    if not lexicon.entries:
        raise ConfigError("empty lexicon")
    inventory = set(units[1:] if units and units[0] == BLANK_SYM else units)
    isyms = SymbolTable(u for u in (units[1:] if units and units[0] == BLANK_SYM else units))
    osyms = SymbolTable()
    for word, _, _ in lexicon.entries:
        osyms.add(word)
    l = Fst(TROPICAL, isyms, osyms)
    root = l.add_state()
    l.set_start(root)
    l.set_final(root)
    for word, _, spell in lexicon.entries:
        for u in spell:
            if u not in inventory:
                raise ConfigError(f"word {word!r} uses unit {u!r} outside the inventory")
        prev = root
        for i, u in enumerate(spell):
            dst = root if i == len(spell) - 1 else l.add_state()
            olabel = osyms.id(word) if i == 0 else EPSILON
            l.add_arc(prev, dst, isyms.id(u), olabel)
            prev = dst
    return l


def build_grammar_fst(lm, word_table):
    """Back-off n-gram acceptor over the given word table.

    States are histories; seen grams are word arcs at -ln p, back-off is
    an epsilon arc at -ln bow to the shortened history; </s> probabilities
    become final weights; the start state is the <s> context.
    """
    g = Fst(TROPICAL, word_table, word_table)
    contexts = {}

    def ctx_state(h):
        s = contexts.get(h)
        if s is None:
            s = g.add_state()
            contexts[h] = s
        return s

    order = lm.order
    for k in range(1, order):
        for gram in lm.ngrams[k - 1]:
            if gram[-1] != EOS:
                ctx_state(gram)
    root = ctx_state(())
    for k in range(1, order + 1):
        for gram in sorted(lm.ngrams[k - 1]):
            logp, _ = lm.ngrams[k - 1][gram]
            hist, word = gram[:-1], gram[-1]
            if word == SOS:
                continue
            if hist not in contexts:
                continue
            src = contexts[hist]
            cost = -logp * LN10
            if word == EOS:
                g.set_final(src, cost)
                continue
            if word == UNK:
                continue
            wid = word_table.get(word)
            if wid is None:
                raise ConfigError(f"grammar word {word!r} missing from the word table")
            nxt = hist + (word,)
            if len(nxt) > order - 1:
                nxt = nxt[len(nxt) - (order - 1):]
            while nxt and nxt not in contexts:
                nxt = nxt[1:]
            g.add_arc(src, contexts[nxt] if nxt else root, wid, wid, cost)
    for h, s in sorted(contexts.items(), key=lambda kv: kv[1]):
        if not h:
            continue
        entry = lm.ngrams[len(h) - 1].get(h)
        bow = entry[1] if entry is not None and entry[1] is not None else 0.0
        shorter = h[1:]
        while shorter and shorter not in contexts:
            shorter = shorter[1:]
        g.add_arc(s, contexts[shorter] if shorter else root, EPSILON, EPSILON, -bow * LN10)
    start = (SOS,)
    while start and start not in contexts:
        start = start[1:]
    g.set_start(contexts[start] if start else root)
    return g


def make_word_table(lexicon):
    t = SymbolTable()
    for word, _, _ in lexicon.entries:
        t.add(word)
    return t


def build_search_graph(token_fst, lexicon_fst, grammar_fst):
    """connect(T o (L o G)); symbol-table mismatches surface as config errors."""
    return connect(compose(token_fst, compose(lexicon_fst, grammar_fst)))


def build_multigraph(tagged_graphs):
    """Union of search graphs with tag-emitting entry arcs.

    tagged_graphs: [(fst, GraphTag)], at least two, over identical input
    and output tables.  The returned machine shares the input table and
    extends the output table with one "#tag:<name>" symbol per component;
    each component is entered by a single epsilon-input arc that emits its
    tag at weight one.
    """
    tagged_graphs = list(tagged_graphs)
    if len(tagged_graphs) < 2:
        raise ConfigError("a multi-graph needs at least two tagged components")
    names = [tag.name for _, tag in tagged_graphs]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate graph tags: {sorted(names)}")
    first = tagged_graphs[0][0]
    for f, _ in tagged_graphs[1:]:
        if f.isyms != first.isyms or f.osyms != first.osyms:
            raise ConfigError("multi-graph components must share symbol tables")
        if f.semiring is not first.semiring:
            raise ConfigError("multi-graph components must share a semiring")
    osyms = first.osyms.copy()
    tag_ids = {}
    for _, tag in tagged_graphs:
        tag_ids[tag.name] = osyms.add(tag.symbol)
    out = Fst(first.semiring, first.isyms, osyms)
    start = out.add_state()
    out.set_start(start)
    for f, tag in tagged_graphs:
        if f.start is None:
            raise ConfigError(f"component {tag.name!r} has no start state")
        offset = out.num_states
        for _ in f.states():
            out.add_state()
        for s in f.states():
            for arc in f.arcs(s):
                out.add_arc(offset + s, offset + arc.dst, arc.ilabel, arc.olabel, arc.weight)
        for s, w in f.finals().items():
            out.set_final(offset + s, w)
        out.add_arc(start, offset + f.start, EPSILON, tag_ids[tag.name])
    return out


def collapse_units(symbols, blank=BLANK_SYM):
    """Reference collapse: merge repeats, then drop blanks."""
    out = []
    prev = None
    for s in symbols:
        if s != prev:
            if s != blank:
                out.append(s)
            prev = s
    return out
