"""Word error rate with a language-subset breakdown.

Utterances are bucketed by the languages of their reference words: all
decisive words from one language puts the utterance in that language's
subset, otherwise it lands in the mixed subset.  Words marked "shared"
are not decisive; a reference made only of shared words counts as mixed,
since nothing ties it to either side.  The overall row micro-averages by
summing counts over the subsets.
"""

import numpy as np

from .errors import DataError
from .kernels import levenshtein_counts

SHARED = "shared"


class ErrorCounts:
    """Tallies for one utterance subset."""

    def __init__(self, languages):
        self.utterances = 0
        self.subs = 0
        self.dels = 0
        self.inss = 0
        self.ref_words = 0
        self.lang_words = {lang: 0 for lang in languages}

    @property
    def errors(self):
        return self.subs + self.dels + self.inss

    @property
    def wer(self):
        """Percent; None when the subset holds no reference words."""
        if self.ref_words == 0:
            return None
        return 100.0 * self.errors / self.ref_words

    def absorb(self, other):
        self.utterances += other.utterances
        self.subs += other.subs
        self.dels += other.dels
        self.inss += other.inss
        self.ref_words += other.ref_words
        for lang, count in other.lang_words.items():
            self.lang_words[lang] += count


class WerReport:
    def __init__(self, lang_a, lang_b, subsets, order):
        self.lang_a = lang_a
        self.lang_b = lang_b
        self.subsets = subsets
        self.order = order

    @property
    def mixed_name(self):
        return f"{self.lang_a}-{self.lang_b}"

    def to_dict(self):
        out = {"languages": [self.lang_a, self.lang_b], "subsets": {}}
        for name in self.order:
            c = self.subsets[name]
            out["subsets"][name] = {
                "utterances": c.utterances,
                "ref_words": c.ref_words,
                "substitutions": c.subs,
                "deletions": c.dels,
                "insertions": c.inss,
                "wer": None if c.wer is None else round(c.wer, 4),
                "ref_words_by_language": dict(sorted(c.lang_words.items())),
            }
        return out


def _classify(ref, word_lang, langs, mixed_name):
    seen = set()
    for w in ref:
        if w not in word_lang:
            raise DataError(f"reference word {w!r} has no language assignment")
        lang = word_lang[w]
        if lang in langs:
            seen.add(lang)
    if len(seen) == 1:
        return next(iter(seen))
    return mixed_name


def _align(ref, hyp):
    ids = {}
    r = np.array([ids.setdefault(w, len(ids)) for w in ref], dtype=np.int64)
    h = np.array([ids.setdefault(w, len(ids)) for w in hyp], dtype=np.int64)
    _, subs, dels, inss = levenshtein_counts(r, h)
    return subs, dels, inss


def score_wer(refs, hyps, word_lang):
    """Score hypothesis transcripts against references.

    refs and hyps map utterance id to a word list and must cover the same
    ids.  word_lang assigns each reference word to a language name or
    "shared"; exactly two language names must occur in the map.
    """
    missing = sorted(set(refs) - set(hyps))
    extra = sorted(set(hyps) - set(refs))
    if missing or extra:
        raise DataError("utterance ids differ between reference and "
                        f"hypothesis; missing: {missing[:8]}, "
                        f"unexpected: {extra[:8]}")
    if not refs:
        raise DataError("no utterances to score")
    langs = sorted(set(word_lang.values()) - {SHARED})
    if len(langs) != 2:
        raise DataError(f"need exactly two languages besides {SHARED!r}, "
                        f"found {langs}")
    lang_a, lang_b = langs
    mixed_name = f"{lang_a}-{lang_b}"
    tally_langs = langs + [SHARED]
    order = [lang_a, lang_b, mixed_name, "all"]
    subsets = {name: ErrorCounts(tally_langs) for name in order}

    for utt_id in sorted(refs):
        ref = list(refs[utt_id])
        hyp = list(hyps[utt_id])
        bucket = subsets[_classify(ref, word_lang, langs, mixed_name)]
        subs, dels, inss = _align(ref, hyp)
        bucket.utterances += 1
        bucket.subs += subs
        bucket.dels += dels
        bucket.inss += inss
        bucket.ref_words += len(ref)
        for w in ref:
            bucket.lang_words[word_lang[w]] += 1
    for name in order[:3]:
        subsets["all"].absorb(subsets[name])
    return WerReport(lang_a, lang_b, subsets, order)


def format_report(report):
    """Fixed-width table, one row per subset plus the overall row."""
    header = ["subset", "utts", "ref", "sub", "del", "ins", "wer%"]
    rows = [header]
    for name in report.order:
        c = report.subsets[name]
        wer = "n/a" if c.wer is None else f"{c.wer:.2f}"
        rows.append([name, str(c.utterances), str(c.ref_words), str(c.subs),
                     str(c.dels), str(c.inss), wer])
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for r in rows:
        cells = [r[0].ljust(widths[0])]
        cells += [r[i].rjust(widths[i]) for i in range(1, len(header))]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"
