"""Synthetic corpus tests: determinism, switch statistics, validation, I/O."""

import numpy as np
import pytest

from csasr.data import (LANG_A, LANG_B, SHARED, SyntheticCorpusSpec,
                        gen_corpus, read_sentences, read_transcripts,
                        switch_rate, write_sentences, write_transcripts)
from csasr.errors import ConfigError, DataError


def small_spec(**over):
    kw = dict(seed=31, words_per_lang=30, shared_words=8, branch=6,
              mono_a=40, mono_b=40, b10_factor=3, cs_train=40,
              test_mono_a=4, test_mono_b=4, test_cs=8,
              am_utts=9, feat_dim=6, noise=0.2)
    kw.update(over)
    return SyntheticCorpusSpec(**kw)


class TestGeneration:

    def test_same_seed_reproduces_everything(self):
        b1 = gen_corpus(small_spec())
        b2 = gen_corpus(small_spec())
        assert b1.corpora == b2.corpora
        assert b1.test == b2.test
        assert b1.am_train == b2.am_train
        assert b1.units == b2.units
        for utt_id in b1.features:
            assert np.array_equal(b1.features[utt_id], b2.features[utt_id])
            assert b1.labels[utt_id] == b2.labels[utt_id]

    def test_different_seed_differs(self):
        b1 = gen_corpus(small_spec())
        b2 = gen_corpus(small_spec(seed=32))
        assert b1.corpora["mono_a"] != b2.corpora["mono_a"]

    def test_inventories_and_sizes(self):
        spec = small_spec()
        b = gen_corpus(spec)
        assert len(b.words_a) == spec.words_per_lang
        assert len(b.words_b) == spec.words_per_lang
        assert len(b.words_shared) == spec.shared_words
        assert not set(b.words_a) & set(b.words_b)
        assert not set(b.words_a) & set(b.words_shared)
        for w in b.words_a:
            assert set(w) <= set(spec.alpha_chars)
        for w in b.words_shared:
            assert set(w) <= set(spec.shared_chars)
        assert len(b.corpora["mono_b10"]) == spec.mono_b * spec.b10_factor
        assert len(b.test) == (spec.test_mono_a + spec.test_mono_b
                               + spec.test_cs)

    def test_sentence_words_come_from_the_right_pools(self):
        b = gen_corpus(small_spec())
        pool_a = set(b.words_a) | set(b.words_shared)
        pool_b = set(b.words_b) | set(b.words_shared)
        for sent in b.corpora["mono_a"]:
            assert set(sent) <= pool_a
        for sent in b.corpora["mono_b"]:
            assert set(sent) <= pool_b
        for sent in b.corpora["cs_train"]:
            assert set(sent) <= pool_a | pool_b

    def test_sentence_length_bounds(self):
        spec = small_spec()
        b = gen_corpus(spec)
        for corpus in b.corpora.values():
            for sent in corpus:
                assert spec.min_sent_len <= len(sent) <= spec.max_sent_len

    def test_features_cover_train_and_test(self):
        spec = small_spec()
        b = gen_corpus(spec)
        ids = [u for u, _ in b.am_train] + [u for u, _ in b.test]
        assert sorted(b.features) == sorted(ids)
        for utt_id, words in b.am_train:
            feats = b.features[utt_id]
            assert feats.ndim == 2 and feats.shape[1] == spec.feat_dim
            labels = b.labels[utt_id]
            assert labels == b.label_ids(words)
            assert 0 not in labels  # blank is never a target

    def test_label_ids_spell_words_in_units(self):
        b = gen_corpus(small_spec())
        word = b.words_a[0]
        assert b.label_ids([word]) == [b.unit_id[c] for c in word]


class TestSwitchRate:

    def test_endpoints_are_exact(self):
        never = gen_corpus(small_spec(switch_prob=0.0, cs_train=60))
        assert switch_rate(never.corpora["cs_train"], never.word_lang) == 0.0
        always = gen_corpus(small_spec(switch_prob=1.0, cs_train=60))
        assert switch_rate(always.corpora["cs_train"], always.word_lang) == 1.0

    def test_estimator_tracks_the_knob(self):
        # 10k sentences give roughly 40k decisive pairs; a 10 percent
        # relative band is ~13 sigma, so a miss means bias, not luck
        spec = small_spec(switch_prob=0.3, cs_train=10000)
        b = gen_corpus(spec)
        rate = switch_rate(b.corpora["cs_train"], b.word_lang)
        assert abs(rate - 0.3) <= 0.03

    def test_no_decisive_pairs_raises(self):
        b = gen_corpus(small_spec())
        shared = list(b.words_shared[:3])
        with pytest.raises(DataError, match="decisive"):
            switch_rate([shared], b.word_lang)

    def test_mono_text_never_switches(self):
        b = gen_corpus(small_spec())
        assert switch_rate(b.corpora["mono_a"], b.word_lang) == 0.0


class TestSpecValidation:

    def test_colliding_inventories_rejected(self):
        with pytest.raises(ConfigError, match="collide"):
            small_spec(alpha_chars="bdfg", shared_chars="g123")

    def test_switch_prob_bounds(self):
        with pytest.raises(ConfigError, match="switch_prob"):
            small_spec(switch_prob=1.5)

    def test_word_length_bounds(self):
        with pytest.raises(ConfigError, match="word length"):
            small_spec(min_word_len=4, max_word_len=2)

    def test_vocabulary_must_fit_the_inventory(self):
        # two chars at lengths 1..2 admit only 6 distinct words
        with pytest.raises(ConfigError):
            gen_corpus(small_spec(alpha_chars="bd", min_word_len=1,
                                  max_word_len=2, words_per_lang=30))


class TestTextIO:

    def test_sentences_round_trip(self, tmp_path):
        sents = [["ab", "cd"], ["ef"]]
        path = tmp_path / "s.txt"
        write_sentences(path, sents)
        assert read_sentences(path) == sents

    def test_transcripts_round_trip(self, tmp_path):
        pairs = [("u1", ["ab", "cd"]), ("u2", ["ef"])]
        path = tmp_path / "t.txt"
        write_transcripts(path, pairs)
        assert read_transcripts(path) == pairs

    def test_duplicate_utterance_id_rejected(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("u1 ab\nu1 cd\n")
        with pytest.raises(DataError, match="u1"):
            read_transcripts(path)
