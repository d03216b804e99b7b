"""Decoder tests: exhaustive-search oracles on toy graphs, pruning bounds,
multi-graph routing."""

import warnings

import numpy as np
import pytest
from numpy.random import default_rng

from csasr.ctc import PosteriorGrid
from csasr.decode import beam_decode, route_rescore, split_tag
from csasr.errors import ConfigError, DataError
from csasr.fst import EPSILON, INF, TROPICAL, Fst, SymbolTable
from csasr.graph import (BLANK_SYM, GraphTag, Lexicon, build_grammar_fst,
                         build_lexicon_fst, build_multigraph,
                         build_search_graph, build_token_fst, make_word_table)
from csasr.nbest import Hypothesis, NBestList
from csasr.ngram import train_kn
from csasr.nn import log_softmax


def rand_grid(rng, num_frames, num_columns):
    return PosteriorGrid(log_softmax(rng.normal(
        size=(num_frames, num_columns))))


def toy_graph(rng, num_units, num_words):
    """Random transducer; epsilon arcs only run forward so closure is
    finite and the recursive oracle terminates."""
    isyms = SymbolTable([f"u{k}" for k in range(1, num_units + 1)])
    osyms = SymbolTable([f"w{k}" for k in range(1, num_words + 1)])
    f = Fst(TROPICAL, isyms, osyms)
    n = int(rng.integers(3, 7))
    for _ in range(n):
        f.add_state()
    f.set_start(0)
    for _ in range(int(rng.integers(n, 3 * n + 1))):
        src = int(rng.integers(0, n))
        dst = int(rng.integers(0, n))
        il = int(rng.integers(1, num_units + 1))
        ol = int(rng.integers(0, num_words + 1))
        f.add_arc(src, dst, il, ol, round(float(rng.uniform(0.0, 2.0)), 3))
    for _ in range(int(rng.integers(0, n))):
        src = int(rng.integers(0, n - 1))
        dst = int(rng.integers(src + 1, n))
        ol = int(rng.integers(0, num_words + 1))
        f.add_arc(src, dst, EPSILON, ol, round(float(rng.uniform(0.0, 1.0)), 3))
    for s in range(n):
        if s == n - 1 or rng.random() < 0.4:
            f.set_final(s, round(float(rng.uniform(0.0, 1.0)), 3))
    return f


def exhaustive(graph, grid, acoustic_scale=1.0):
    """Enumerate every accepting path; min cost per output sequence."""
    frames = grid.num_frames
    best = {}

    def walk(state, t, total, gcost, words):
        if t == frames:
            fw = graph.final_weight(state)
            if fw < INF:
                cand = (total + fw, gcost + fw)
                if words not in best or cand[0] < best[words][0]:
                    best[words] = cand
        for arc in graph.arcs(state):
            nwords = words + ((arc.olabel,) if arc.olabel != EPSILON else ())
            if arc.ilabel == EPSILON:
                walk(arc.dst, t, total + arc.weight, gcost + arc.weight,
                     nwords)
            elif t < frames:
                ac = acoustic_scale * -grid.logp[t, arc.ilabel - 1]
                walk(arc.dst, t + 1, total + arc.weight + ac,
                     gcost + arc.weight, nwords)

    walk(graph.start, 0, 0.0, 0.0, ())
    return best


def oracle_ranking(graph, best):
    ranked = [(total, tuple(graph.osyms.sym(i) for i in words), gcost)
              for words, (total, gcost) in best.items()]
    ranked.sort(key=lambda e: (e[0], e[1]))
    return ranked


class TestBeamDecodeExact:
    def test_matches_exhaustive_oracle(self):
        rng = default_rng(7)
        nonempty = 0
        for case in range(50):
            num_units = int(rng.integers(2, 4))
            frames = int(rng.integers(1, 7))
            graph = toy_graph(rng, num_units, 3)
            grid = rand_grid(rng, frames, num_units)
            scale = float(rng.uniform(0.5, 2.0))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                nb = beam_decode(graph, grid, beam=None,
                                 acoustic_scale=scale, n=4,
                                 utt_id=f"case{case}")
            want = oracle_ranking(graph, exhaustive(graph, grid, scale))
            assert len(nb) == min(4, len(want))
            for hyp, (total, wstrs, gcost) in zip(nb.hyps, want):
                assert tuple(hyp.words) == wstrs
                assert hyp.total == pytest.approx(-total, abs=1e-9)
                assert hyp.ngram == pytest.approx(-gcost, abs=1e-9)
                assert hyp.acoustic == pytest.approx(-(total - gcost),
                                                     abs=1e-9)
            if want:
                nonempty += 1
        assert nonempty >= 30

    def test_hand_single_path(self):
        isyms = SymbolTable(["u1", "u2"])
        osyms = SymbolTable(["w1"])
        f = Fst(TROPICAL, isyms, osyms)
        for _ in range(3):
            f.add_state()
        f.set_start(0)
        f.add_arc(0, 1, 1, 1, 0.5)
        f.add_arc(1, 2, 2, EPSILON, 0.25)
        f.set_final(2, 0.75)
        logp = log_softmax(np.array([[0.0, 1.0], [2.0, 0.5]]))
        grid = PosteriorGrid(logp)
        nb = beam_decode(f, grid, acoustic_scale=2.0, utt_id="hand")
        hyp = nb.best()
        graph_cost = 0.5 + 0.25 + 0.75
        acoustic_cost = 2.0 * (-logp[0, 0] - logp[1, 1])
        assert hyp.words == ["w1"]
        assert hyp.ngram == pytest.approx(-graph_cost, abs=1e-12)
        assert hyp.acoustic == pytest.approx(-acoustic_cost, abs=1e-12)
        assert hyp.total == pytest.approx(-(graph_cost + acoustic_cost),
                                          abs=1e-12)

    def test_duplicate_word_sequences_merged(self):
        isyms = SymbolTable(["u1", "u2"])
        osyms = SymbolTable(["w1", "w2"])
        f = Fst(TROPICAL, isyms, osyms)
        for _ in range(2):
            f.add_state()
        f.set_start(0)
        f.add_arc(0, 1, 1, 1, 0.2)
        f.add_arc(0, 1, 1, 1, 0.7)
        f.add_arc(0, 1, 2, 2, 1.0)
        f.set_final(1)
        grid = PosteriorGrid(np.log(np.full((1, 2), 0.5)))
        nb = beam_decode(f, grid, n=5, utt_id="dup")
        assert [h.words for h in nb.hyps] == [["w1"], ["w2"]]
        assert nb.best().ngram == pytest.approx(-0.2, abs=1e-12)

    def chain2(self):
        f = Fst(TROPICAL, SymbolTable(["u1", "u2"]), SymbolTable(["w1"]))
        for _ in range(3):
            f.add_state()
        f.set_start(0)
        f.add_arc(0, 1, 1, 1, 0.0)
        f.add_arc(1, 2, 2, EPSILON, 0.0)
        f.set_final(2)
        return f

    def test_dead_search_warns_and_returns_empty(self):
        grid = PosteriorGrid(np.log(np.full((4, 2), 0.5)))
        with pytest.warns(UserWarning, match="no token survived frame 3"):
            nb = beam_decode(self.chain2(), grid, utt_id="dead")
        assert len(nb) == 0
        assert nb.utt_id == "dead"

    def test_no_reachable_final_warns(self):
        grid = PosteriorGrid(np.log(np.full((1, 2), 0.5)))
        with pytest.warns(UserWarning, match="final"):
            nb = beam_decode(self.chain2(), grid, utt_id="nofinal")
        assert len(nb) == 0

    def test_symbol_count_mismatch_rejected(self):
        rng = default_rng(0)
        graph = toy_graph(rng, 3, 2)
        grid = rand_grid(rng, 4, 2)
        with pytest.raises(ConfigError, match="units"):
            beam_decode(graph, grid)

    def test_missing_start_rejected(self):
        f = Fst(TROPICAL, SymbolTable(["u1", "u2"]), SymbolTable(["w1"]))
        with pytest.raises(ConfigError, match="start"):
            beam_decode(f, PosteriorGrid(np.log(np.full((1, 2), 0.5))))

    def test_bad_n_rejected(self):
        rng = default_rng(1)
        graph = toy_graph(rng, 2, 2)
        with pytest.raises(ConfigError):
            beam_decode(graph, rand_grid(rng, 2, 2), n=0)


class TestPruning:
    def cases(self, seed, count):
        rng = default_rng(seed)
        for case in range(count):
            num_units = int(rng.integers(2, 4))
            graph = toy_graph(rng, num_units, 3)
            grid = rand_grid(rng, int(rng.integers(2, 7)), num_units)
            yield graph, grid

    def test_narrow_beam_never_beats_exact(self):
        compared = 0
        for graph, grid in self.cases(11, 30):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                exact = beam_decode(graph, grid, beam=None)
                pruned = beam_decode(graph, grid, beam=0.25)
            if len(exact) and len(pruned):
                assert pruned.best().total <= exact.best().total + 1e-12
                compared += 1
        assert compared >= 10

    def test_wide_beam_recovers_exact(self):
        for graph, grid in self.cases(12, 20):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                exact = beam_decode(graph, grid, beam=None, n=3)
                wide = beam_decode(graph, grid, beam=1e9, n=3)
            assert [h.words for h in exact.hyps] == [h.words for h in wide.hyps]
            for a, b in zip(exact.hyps, wide.hyps):
                assert a.total == pytest.approx(b.total, abs=1e-12)

    def test_token_cap_yields_admissible_result(self):
        hits = 0
        for graph, grid in self.cases(13, 20):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                exact = beam_decode(graph, grid, beam=None)
                capped = beam_decode(graph, grid, beam=None, max_tokens=2)
            if len(exact) and len(capped):
                assert capped.best().total <= exact.best().total + 1e-12
                hits += 1
        assert hits >= 5


class TestSplitTag:
    def test_single_tag_extracted(self):
        tag, words = split_tag(["#tag:nl", "de", "man"])
        assert tag == "nl"
        assert words == ["de", "man"]

    def test_tag_position_irrelevant(self):
        tag, words = split_tag(["de", "#tag:fy", "man"])
        assert tag == "fy"
        assert words == ["de", "man"]

    def test_no_tag_passthrough(self):
        tag, words = split_tag(["de", "man"])
        assert tag is None
        assert words == ["de", "man"]

    def test_accepts_hypothesis(self):
        hyp = Hypothesis(["#tag:cs", "x"], -1.0, -1.0)
        tag, words = split_tag(hyp)
        assert (tag, words) == ("cs", ["x"])

    def test_two_tags_rejected(self):
        with pytest.raises(DataError):
            split_tag(["#tag:a", "x", "#tag:b"])


def bilingual_graphs():
    units = [BLANK_SYM, "k", "a", "t", "o"]
    lex = Lexicon([("at", "alpha", ("a", "t")), ("ka", "alpha", ("k", "a")),
                   ("ot", "beta", ("o", "t")), ("to", "beta", ("t", "o"))])
    token = build_token_fst(units)
    lfst = build_lexicon_fst(lex, units)
    table = make_word_table(lex)
    lm_a = train_kn([["ka", "at"], ["ka"], ["at", "ka"], ["at"]], 2)
    lm_b = train_kn([["to", "ot"], ["to"], ["ot"]], 2)
    g_a = build_search_graph(token, lfst, build_grammar_fst(lm_a, table))
    g_b = build_search_graph(token, lfst, build_grammar_fst(lm_b, table))
    multi = build_multigraph([(g_a, GraphTag("a")), (g_b, GraphTag("b"))])
    return g_a, g_b, multi


class TestMultigraphDecode:
    def test_union_best_equals_best_component(self):
        g_a, g_b, multi = bilingual_graphs()
        rng = default_rng(29)
        checked = 0
        for case in range(8):
            grid = rand_grid(rng, int(rng.integers(4, 7)), 5)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                nb_u = beam_decode(multi, grid, utt_id=f"m{case}")
                nb_a = beam_decode(g_a, grid, utt_id=f"a{case}")
                nb_b = beam_decode(g_b, grid, utt_id=f"b{case}")
            components = [(nb, tag) for nb, tag in ((nb_a, "a"), (nb_b, "b"))
                          if len(nb)]
            if not components:
                assert len(nb_u) == 0
                continue
            best_nb, best_tag = max(components, key=lambda c: c[0].best().total)
            union_best = nb_u.best()
            assert union_best.words == best_nb.best().words
            assert union_best.total == pytest.approx(best_nb.best().total,
                                                     abs=1e-9)
            assert union_best.tag == best_tag
            checked += 1
        assert checked >= 5

    def test_every_union_hypothesis_is_tagged_and_clean(self):
        _, _, multi = bilingual_graphs()
        grid = rand_grid(default_rng(31), 5, 5)
        nb = beam_decode(multi, grid, n=4, utt_id="tags")
        assert len(nb) >= 2
        for hyp in nb.hyps:
            assert hyp.tag in ("a", "b")
            assert all(not w.startswith("#tag:") for w in hyp.words)


class CallLog:
    """Sentence scorer stub; fixed per-word value, records every request."""

    def __init__(self, value):
        self.value = value
        self.calls = []

    def sentence_word_logps(self, words):
        self.calls.append(list(words))
        return [self.value] * (len(words) + 1)


def tagged_list(utt_id, words, tag):
    n = len(words) + 1
    return NBestList(utt_id, [
        Hypothesis(words, -1.0, -2.0, tag=tag, ngram_word_logps=[-2.0 / n] * n),
        Hypothesis(words + ["x"], -3.0, -4.0, tag=tag,
                   ngram_word_logps=[-4.0 / (n + 1)] * (n + 1)),
    ])


class TestRouteRescore:
    def models(self):
        return {"a": CallLog(-0.5), "b": CallLog(-1.5), "cs": CallLog(-1.0)}

    def test_routes_by_rank_one_tag(self):
        models = self.models()
        sets = [tagged_list("u1", ["p", "q"], "a"),
                tagged_list("u2", ["r"], "b"),
                tagged_list("u3", ["s"], None)]
        route_rescore(sets, models, 0.5)
        assert models["a"].calls == [["p", "q"], ["p", "q", "x"]]
        assert models["b"].calls == [["r"], ["r", "x"]]
        assert models["cs"].calls == [["s"], ["s", "x"]]

    def test_matches_direct_rescore(self):
        from csasr.rnnlm import rescore_nbest

        models = self.models()
        nb = tagged_list("u1", ["p", "q"], "b")
        routed = route_rescore([nb], models, 0.3)[0]
        direct = rescore_nbest(nb, CallLog(-1.5), 0.3)
        assert [h.words for h in routed.hyps] == [h.words for h in direct.hyps]
        for r, d in zip(routed.hyps, direct.hyps):
            assert r.total == pytest.approx(d.total, abs=1e-12)

    def test_missing_model_names_tag(self):
        models = {"a": CallLog(-0.5)}
        with pytest.raises(ConfigError, match="'b'"):
            route_rescore([tagged_list("u1", ["p"], "b")], models, 0.5)

    def test_empty_list_passes_through(self):
        empty = NBestList("u0", [])
        out = route_rescore([empty], self.models(), 0.5)
        assert out[0] is empty
