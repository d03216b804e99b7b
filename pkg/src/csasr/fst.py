"""Weighted finite-state transducers over tropical and log semirings.

Weights are costs (negated log probabilities): plus is min in the tropical
semiring and a negated log-sum-exp in the log semiring, times is float
addition, zero is +inf, one is 0.0.  Epsilon is label id 0 in every symbol
table.  Text serialization follows the usual line format "src dst ilabel
olabel [weight]" with final states as "state [weight]" and the source of
the first line as the start state.
"""

import heapq
import itertools
import math
from dataclasses import dataclass

from .errors import ConfigError, InternalError, ParseError

INF = float("inf")
EPSILON = 0
EPSILON_SYM = "<eps>"


class Semiring:
    def __init__(self, name, plus):
        self.name = name
        self.plus = plus
        self.zero = INF
        self.one = 0.0

    def times(self, a, b):
        return a + b

    def __repr__(self):
        return f"Semiring({self.name})"


def _tropical_plus(a, b):
    return a if a <= b else b


def _log_plus(a, b):
    # -log(exp(-a) + exp(-b)) with +inf as the absorbing zero
    if a == INF:
        return b
    if b == INF:
        return a
    if a > b:
        a, b = b, a
    return a - math.log1p(math.exp(a - b))


TROPICAL = Semiring("tropical", _tropical_plus)
LOG = Semiring("log", _log_plus)


def get_semiring(name):
    if name == "tropical":
        return TROPICAL
    if name == "log":
        return LOG
    raise ConfigError(f"unknown semiring {name!r}")


class SymbolTable:
    """Bidirectional symbol/id map; id 0 is always epsilon."""

    def __init__(self, symbols=()):
        self._syms = [EPSILON_SYM]
        self._ids = {EPSILON_SYM: 0}
        for s in symbols:
            self.add(s)

    def add(self, sym):
        i = self._ids.get(sym)
        if i is None:
            i = len(self._syms)
            self._syms.append(sym)
            self._ids[sym] = i
        return i

    def id(self, sym):
        i = self._ids.get(sym)
        if i is None:
            raise ConfigError(f"symbol {sym!r} not in table")
        return i

    def get(self, sym):
        return self._ids.get(sym)

    def sym(self, i):
        if not 0 <= i < len(self._syms):
            raise ConfigError(f"symbol id {i} out of range")
        return self._syms[i]

    def symbols(self):
        return list(self._syms)

    def copy(self):
        t = SymbolTable()
        t._syms = list(self._syms)
        t._ids = dict(self._ids)
        return t

    def __len__(self):
        return len(self._syms)

    def __contains__(self, sym):
        return sym in self._ids

    def __eq__(self, other):
        return isinstance(other, SymbolTable) and self._syms == other._syms

    def __ne__(self, other):
        return not self.__eq__(other)

    def write(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for i, s in enumerate(self._syms):
                f.write(f"{s}\t{i}\n")

    @classmethod
    def read(cls, path):
        t = cls()
        with open(path, encoding="utf-8") as f:
            for ln, line in enumerate(f, 1):
                line = line.strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise ParseError(f"expected 'symbol id': {line!r}", line=ln)
                sym, sid = parts[0], parts[1]
                try:
                    sid = int(sid)
                except ValueError:
                    raise ParseError(f"bad symbol id {parts[1]!r}", line=ln)
                if sid == 0:
                    if sym != EPSILON_SYM:
                        raise ParseError(f"id 0 must be {EPSILON_SYM}, got {sym!r}", line=ln)
                    continue
                got = t.add(sym)
                if got != sid:
                    raise ParseError(f"non-contiguous id {sid} for {sym!r} (expected {got})", line=ln)
        return t


@dataclass(slots=True)
class Arc:
    ilabel: int
    olabel: int
    weight: float
    dst: int


class Fst:
    """Mutable arc-list WFST with a single start state and weighted finals."""

    def __init__(self, semiring, isyms, osyms):
        self.semiring = semiring
        self.isyms = isyms
        self.osyms = osyms
        self.start = None
        self._arcs = []
        self._finals = {}

    @property
    def num_states(self):
        return len(self._arcs)

    @property
    def num_arcs(self):
        return sum(len(a) for a in self._arcs)

    def add_state(self):
        self._arcs.append([])
        return len(self._arcs) - 1

    def _check_state(self, s):
        if not 0 <= s < len(self._arcs):
            raise ConfigError(f"state {s} does not exist")

    def set_start(self, s):
        self._check_state(s)
        self.start = s

    def set_final(self, s, weight=None):
        self._check_state(s)
        self._finals[s] = self.semiring.one if weight is None else float(weight)

    def final_weight(self, s):
        return self._finals.get(s, self.semiring.zero)

    def is_final(self, s):
        return s in self._finals

    def finals(self):
        return dict(self._finals)

    def add_arc(self, src, dst, ilabel, olabel, weight=None):
        self._check_state(src)
        self._check_state(dst)
        if not 0 <= ilabel < len(self.isyms):
            raise ConfigError(f"input label {ilabel} outside symbol table")
        if not 0 <= olabel < len(self.osyms):
            raise ConfigError(f"output label {olabel} outside symbol table")
        w = self.semiring.one if weight is None else float(weight)
        self._arcs[src].append(Arc(ilabel, olabel, w, dst))

    def arcs(self, s):
        self._check_state(s)
        return self._arcs[s]

    def states(self):
        return range(len(self._arcs))

    def copy(self):
        f = Fst(self.semiring, self.isyms, self.osyms)
        f.start = self.start
        f._arcs = [[Arc(a.ilabel, a.olabel, a.weight, a.dst) for a in arcs] for arcs in self._arcs]
        f._finals = dict(self._finals)
        return f

    def __repr__(self):
        return (f"Fst({self.semiring.name}, states={self.num_states}, "
                f"arcs={self.num_arcs}, finals={len(self._finals)})")


def compose(a, b):
    """Compose a with b, sequencing epsilons through a three-state filter.

    The filter admits exactly one interleaving of any given pair of epsilon
    runs so path weights are never duplicated, which keeps log-semiring
    sums correct: state 0 allows anything, state 1 only a-side epsilon
    moves, state 2 only b-side epsilon moves, and matched symbols reset to
    0.  Paired epsilon steps are taken only from state 0.
    """
    if a.semiring is not b.semiring:
        raise ConfigError("compose: semirings differ")
    if a.osyms != b.isyms:
        raise ConfigError("compose: left output symbols differ from right input symbols")
    sr = a.semiring
    out = Fst(sr, a.isyms, b.osyms)
    if a.start is None or b.start is None:
        return out

    state_map = {}
    queue = []

    def get_state(qa, qb, f):
        key = (qa, qb, f)
        s = state_map.get(key)
        if s is None:
            s = out.add_state()
            state_map[key] = s
            queue.append(key)
        return s

    out.set_start(get_state(a.start, b.start, 0))
    head = 0
    while head < len(queue):
        qa, qb, f = queue[head]
        src = state_map[(qa, qb, f)]
        head += 1
        fa = a.final_weight(qa)
        fb = b.final_weight(qb)
        if fa != sr.zero and fb != sr.zero:
            out.set_final(src, sr.times(fa, fb))
        b_by_ilabel = {}
        for arc_b in b.arcs(qb):
            b_by_ilabel.setdefault(arc_b.ilabel, []).append(arc_b)
        for arc_a in a.arcs(qa):
            if arc_a.olabel != EPSILON:
                for arc_b in b_by_ilabel.get(arc_a.olabel, ()):
                    dst = get_state(arc_a.dst, arc_b.dst, 0)
                    out.add_arc(src, dst, arc_a.ilabel, arc_b.olabel,
                                sr.times(arc_a.weight, arc_b.weight))
            else:
                if f != 2:
                    dst = get_state(arc_a.dst, qb, 1)
                    out.add_arc(src, dst, arc_a.ilabel, EPSILON, arc_a.weight)
                if f == 0:
                    for arc_b in b_by_ilabel.get(EPSILON, ()):
                        dst = get_state(arc_a.dst, arc_b.dst, 0)
                        out.add_arc(src, dst, arc_a.ilabel, arc_b.olabel,
                                    sr.times(arc_a.weight, arc_b.weight))
        if f != 1:
            for arc_b in b_by_ilabel.get(EPSILON, ()):
                dst = get_state(qa, arc_b.dst, 2)
                out.add_arc(src, dst, EPSILON, arc_b.olabel, arc_b.weight)
    return out


def union(fsts):
    """Union via a fresh start state with weight-one epsilon entry arcs."""
    fsts = list(fsts)
    if not fsts:
        raise ConfigError("union: no machines given")
    first = fsts[0]
    for f in fsts[1:]:
        if f.semiring is not first.semiring:
            raise ConfigError("union: semirings differ")
        if f.isyms != first.isyms or f.osyms != first.osyms:
            raise ConfigError("union: symbol tables differ")
    out = Fst(first.semiring, first.isyms, first.osyms)
    start = out.add_state()
    out.set_start(start)
    for f in fsts:
        if f.start is None:
            continue
        offset = out.num_states
        for _ in f.states():
            out.add_state()
        for s in f.states():
            for arc in f.arcs(s):
                out.add_arc(offset + s, offset + arc.dst, arc.ilabel, arc.olabel, arc.weight)
        for s, w in f.finals().items():
            out.set_final(offset + s, w)
        out.add_arc(start, offset + f.start, EPSILON, EPSILON)
    return out


def connect(f):
    """Drop states not on a start-to-final path; state ids are compacted."""
    out = Fst(f.semiring, f.isyms, f.osyms)
    if f.start is None:
        return out
    forward = set()
    stack = [f.start]
    while stack:
        s = stack.pop()
        if s in forward:
            continue
        forward.add(s)
        for arc in f.arcs(s):
            if arc.dst not in forward:
                stack.append(arc.dst)
    rev = {}
    for s in f.states():
        for arc in f.arcs(s):
            rev.setdefault(arc.dst, []).append(s)
    backward = set()
    stack = [s for s in f.finals() if s in forward]
    while stack:
        s = stack.pop()
        if s in backward:
            continue
        backward.add(s)
        for p in rev.get(s, ()):
            if p not in backward:
                stack.append(p)
    keep = sorted(forward & backward)
    if f.start not in keep:
        return out
    remap = {}
    for s in keep:
        remap[s] = out.add_state()
    out.set_start(remap[f.start])
    for s in keep:
        for arc in f.arcs(s):
            if arc.dst in remap:
                out.add_arc(remap[s], remap[arc.dst], arc.ilabel, arc.olabel, arc.weight)
    for s, w in f.finals().items():
        if s in remap:
            out.set_final(remap[s], w)
    return out


def _backward_distances(f):
    """Exact min cost from each state to acceptance, final weight included.

    Bellman-Ford so grammar back-off chains with sub-unity costs are
    handled; a relaxation that survives num_states rounds means a negative
    cycle, which no valid decoding graph contains.
    """
    dist = [INF] * f.num_states
    for s, w in f.finals().items():
        dist[s] = w
    arcs = [(s, a) for s in f.states() for a in f.arcs(s)]
    for _ in range(f.num_states):
        changed = False
        for s, a in arcs:
            if dist[a.dst] == INF:
                continue
            nd = a.weight + dist[a.dst]
            if nd < dist[s] - 1e-15:
                dist[s] = nd
                changed = True
        if not changed:
            return dist
    raise InternalError("negative-weight cycle in shortest-path distances")


def shortest_path(f, n=1):
    """n lowest-cost accepting paths in the tropical semiring.

    Returns [(input_labels, output_labels, weight)] ordered by weight with
    ties broken by the epsilon-stripped input label sequence.  Intended for
    machines with finitely many relevant paths (zero-cost cycles are not
    supported); each state is expanded a bounded number of times.
    """
    if f.semiring is not TROPICAL:
        raise ConfigError("shortest_path requires the tropical semiring")
    if n < 1:
        raise ConfigError(f"shortest_path: n must be >= 1, got {n}")
    if f.start is None or not f.finals():
        return []
    beta = _backward_distances(f)
    if beta[f.start] == INF:
        return []
    results = []
    counter = itertools.count()
    # heap entries: (bound, stripped input labels, tiebreak, done, state, cost, olabels)
    heap = [(beta[f.start], (), next(counter), False, f.start, 0.0, ())]
    pops = {}
    budget = 1000 * n + 100000
    while heap and len(results) < n:
        bound, ilabels, _, done, state, cost, olabels = heapq.heappop(heap)
        if done:
            results.append((ilabels, olabels, cost))
            continue
        seen = pops.get(state, 0)
        if seen >= 4 * n + 8:
            continue
        pops[state] = seen + 1
        budget -= 1
        if budget < 0:
            raise InternalError("shortest_path expansion budget exceeded")
        fw = f.final_weight(state)
        if fw != INF:
            total = cost + fw
            heapq.heappush(heap, (total, ilabels, next(counter), True, -1, total, olabels))
        for arc in f.arcs(state):
            if beta[arc.dst] == INF:
                continue
            ncost = cost + arc.weight
            nil = ilabels + (arc.ilabel,) if arc.ilabel != EPSILON else ilabels
            nol = olabels + (arc.olabel,) if arc.olabel != EPSILON else olabels
            heapq.heappush(heap, (ncost + beta[arc.dst], nil, next(counter),
                                  False, arc.dst, ncost, nol))
    return results


def write_fst_text(f, path):
    if f.start is None:
        raise ConfigError("cannot serialize a machine with no start state")
    order = [f.start] + [s for s in f.states() if s != f.start]
    start_leads_with_final = not f.arcs(f.start)
    if start_leads_with_final and not f.is_final(f.start):
        # the format marks the start as the source of the first line, so a
        # start with neither arcs nor a final weight cannot be encoded
        raise ConfigError("cannot serialize a machine whose start has no arcs and is not final")
    with open(path, "w", encoding="utf-8") as fh:
        if start_leads_with_final:
            fh.write(f"{f.start} {f.final_weight(f.start):.6f}\n")
        for s in order:
            for a in f.arcs(s):
                fh.write(f"{s} {a.dst} {a.ilabel} {a.olabel} {a.weight:.6f}\n")
        for s in sorted(f.finals()):
            if start_leads_with_final and s == f.start:
                continue
            fh.write(f"{s} {f.final_weight(s):.6f}\n")


def read_fst_text(path, semiring, isyms, osyms):
    f = Fst(semiring, isyms, osyms)

    def ensure(sid):
        while f.num_states <= sid:
            f.add_state()

    start = None
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            try:
                if len(parts) in (4, 5):
                    src, dst, il, ol = (int(x) for x in parts[:4])
                    w = float(parts[4]) if len(parts) == 5 else semiring.one
                    ensure(max(src, dst))
                    f.add_arc(src, dst, il, ol, w)
                    if start is None:
                        start = src
                elif len(parts) in (1, 2):
                    s = int(parts[0])
                    w = float(parts[1]) if len(parts) == 2 else semiring.one
                    ensure(s)
                    f.set_final(s, w)
                    if start is None:
                        start = s
                else:
                    raise ParseError(f"expected arc or final line: {line!r}", line=ln)
            except ValueError:
                raise ParseError(f"bad numeric field: {line!r}", line=ln)
            except ConfigError as e:
                raise ParseError(str(e), line=ln)
    if start is None:
        raise ParseError("no states in machine text")
    f.set_start(start)
    return f
