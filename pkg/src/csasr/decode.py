"""Frame-synchronous Viterbi beam search over tropical search graphs.

Tokens are (state, emitted output symbols) pairs carrying a total cost and
its graph-cost component; the acoustic part is their difference.  Each
frame extends every token along arcs that consume one unit symbol, paying
acoustic_scale times the negated log posterior of that unit plus the arc
weight, then follows epsilon-input arcs to closure (label-correcting
relaxation, safe for the backoff/entry epsilon structure which is acyclic).
After the last frame final weights close surviving tokens; hypotheses are
the n best distinct output strings, ties broken by the word sequence.
"""

import warnings
from collections import deque

from .errors import ConfigError, DataError, InternalError
from .fst import EPSILON, INF
from .graph import TAG_PREFIX
from .nbest import Hypothesis, NBestList


def _eps_closure(graph, tokens):
    """In-place relaxation of epsilon-input arcs over the token table."""
    queue = deque(tokens.keys())
    budget = (graph.num_states + len(tokens) + 10) * (graph.num_arcs + 10)
    while queue:
        budget -= 1
        if budget < 0:
            raise InternalError("epsilon closure did not settle; "
                                "epsilon cycle with negative weight?")
        key = queue.popleft()
        entry = tokens.get(key)
        if entry is None:
            continue
        total, gcost = entry
        state, words = key
        for arc in graph.arcs(state):
            if arc.ilabel != EPSILON:
                continue
            nwords = words + ((arc.olabel,) if arc.olabel != EPSILON else ())
            nkey = (arc.dst, nwords)
            cand = (total + arc.weight, gcost + arc.weight)
            cur = tokens.get(nkey)
            if cur is None or cand[0] < cur[0]:
                tokens[nkey] = cand
                queue.append(nkey)


def _token_tag(words, tag_ids):
    for w in words:
        if w in tag_ids:
            return w
    return None


def _prune(tokens, beam, max_tokens, tag_ids):
    """Beam and count pruning, applied per graph tag.

    Tokens inside a tagged union component compete only with each other,
    so the union search keeps exactly the tokens the per-component
    searches would keep; one component's cheaper language model cannot
    starve another's hypotheses out of the beam.
    """
    if not tokens or (beam is None and max_tokens is None):
        return tokens
    groups = {}
    for key, val in tokens.items():
        tag = _token_tag(key[1], tag_ids) if tag_ids else None
        groups.setdefault(tag, []).append((key, val))
    out = {}
    for items in groups.values():
        if beam is not None:
            best = min(val[0] for _, val in items)
            items = [(k, v) for k, v in items if v[0] <= best + beam]
        if max_tokens is not None and len(items) > max_tokens:
            items = sorted(items, key=lambda kv: (kv[1][0], kv[0][1]))
            items = items[:max_tokens]
        out.update(items)
    return out


def split_tag(hyp):
    """Extract the graph identification tag from an output word sequence.

    Accepts a word list or a Hypothesis.  Returns (tag name or None, words
    without tag symbols); more than one tag is a graph construction bug.
    """
    words = hyp.words if isinstance(hyp, Hypothesis) else list(hyp)
    tags = [w[len(TAG_PREFIX):] for w in words if w.startswith(TAG_PREFIX)]
    if len(tags) > 1:
        raise DataError(f"hypothesis carries {len(tags)} graph tags: {tags}")
    clean = [w for w in words if not w.startswith(TAG_PREFIX)]
    return (tags[0] if tags else None), clean


def beam_decode(graph, grid, beam=None, acoustic_scale=1.0, n=1,
                utt_id="utt", max_tokens=100000):
    """n best distinct word sequences for one utterance.

    beam None means unpruned (exact) search.  Graph input symbol ids 1..V
    must correspond to posterior grid columns 0..V-1 (blank first).
    """
    if graph.start is None:
        raise ConfigError("graph has no start state")
    if len(graph.isyms) != grid.num_symbols + 1:
        raise ConfigError(f"graph expects {len(graph.isyms) - 1} units, "
                          f"grid carries {grid.num_symbols}")
    if n < 1:
        raise ConfigError("need n >= 1")

    tag_ids = frozenset(
        i for i, sym in enumerate(graph.osyms.symbols())
        if sym.startswith(TAG_PREFIX))
    logp = grid.logp
    tokens = {(graph.start, ()): (0.0, 0.0)}
    _eps_closure(graph, tokens)
    for t in range(grid.num_frames):
        advanced = {}
        for (state, words), (total, gcost) in tokens.items():
            for arc in graph.arcs(state):
                if arc.ilabel == EPSILON:
                    continue
                acoustic = acoustic_scale * -logp[t, arc.ilabel - 1]
                cand = (total + arc.weight + acoustic, gcost + arc.weight)
                nwords = words + ((arc.olabel,) if arc.olabel != EPSILON else ())
                nkey = (arc.dst, nwords)
                cur = advanced.get(nkey)
                if cur is None or cand[0] < cur[0]:
                    advanced[nkey] = cand
        _eps_closure(graph, advanced)
        tokens = _prune(advanced, beam, max_tokens, tag_ids)
        if not tokens:
            warnings.warn(f"{utt_id}: no token survived frame {t + 1} of "
                          f"{grid.num_frames}; beam too narrow or no graph "
                          "path of this length")
            return NBestList(utt_id, [])

    by_words = {}
    for (state, words), (total, gcost) in tokens.items():
        fw = graph.final_weight(state)
        if fw >= INF:
            continue
        cand = (total + fw, gcost + fw)
        cur = by_words.get(words)
        if cur is None or cand[0] < cur[0]:
            by_words[words] = cand
    if not by_words:
        warnings.warn(f"{utt_id}: no surviving token reached a final state")
        return NBestList(utt_id, [])

    scored = []
    for words, (total, gcost) in by_words.items():
        syms = [graph.osyms.sym(w) for w in words]
        tag, clean = split_tag(syms)
        scored.append((total, tuple(clean), gcost, tag))
    scored.sort(key=lambda item: (item[0], item[1]))
    hyps = [Hypothesis(clean, acoustic=-(total - gcost), ngram=-gcost, tag=tag)
            for total, clean, gcost, tag in scored[:n]]
    return NBestList(utt_id, hyps)


def route_rescore(nbest_sets, models, weight, ngrams=None, space="prob",
                  default_tag="cs"):
    """Rescore each utterance with the model selected by its rank-1 tag.

    models: tag name -> recurrent LM; ngrams: optional tag name -> n-gram
    model used to annotate per-word scores.  Untagged lists route to
    default_tag.  Empty lists pass through unchanged.
    """
    from .rnnlm import rescore_nbest

    out = []
    for nb in nbest_sets:
        if len(nb) == 0:
            out.append(nb)
            continue
        tag = nb.best().tag or default_tag
        if tag not in models:
            raise ConfigError(f"no rescoring model for graph tag {tag!r}")
        ngram = ngrams.get(tag) if ngrams else None
        out.append(rescore_nbest(nb, models[tag], weight, ngram=ngram,
                                 space=space))
    return out
