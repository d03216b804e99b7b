"""N-best hypothesis lists with separated acoustic and language-model
scores, plus their text serialization.

Scores are natural-log probabilities (higher is better); decoder costs are
negated on the way in.  A hypothesis may carry per-word n-gram log
probabilities (one per word plus a final sentence-end term) so rescoring can
interpolate word by word.
"""

from .errors import DataError, ParseError

NO_TAG = "-"


class Hypothesis:
    """One transcription candidate with its score breakdown."""

    __slots__ = ("words", "acoustic", "ngram", "tag", "ngram_word_logps")

    def __init__(self, words, acoustic, ngram, tag=None, ngram_word_logps=None):
        self.words = list(words)
        self.acoustic = float(acoustic)
        self.ngram = float(ngram)
        self.tag = tag
        if ngram_word_logps is not None:
            ngram_word_logps = [float(v) for v in ngram_word_logps]
            if len(ngram_word_logps) != len(self.words) + 1:
                raise DataError("per-word scores must cover every word plus "
                                "the sentence end")
        self.ngram_word_logps = ngram_word_logps

    @property
    def total(self):
        return self.acoustic + self.ngram

    def __repr__(self):
        return (f"Hypothesis({' '.join(self.words)!r}, ac={self.acoustic:.3f}, "
                f"lm={self.ngram:.3f}, tag={self.tag})")


class NBestList:
    """Best-first hypotheses for one utterance."""

    def __init__(self, utt_id, hyps):
        # empty lists are legal: the decoder reports dead searches this way
        self.utt_id = utt_id
        self.hyps = list(hyps)

    def __len__(self):
        return len(self.hyps)

    def __iter__(self):
        return iter(self.hyps)

    def best(self):
        if not self.hyps:
            raise DataError(f"empty n-best list for {self.utt_id}")
        return self.hyps[0]

    def sorted_copy(self):
        """Stable re-sort by total score, best first."""
        return NBestList(self.utt_id,
                         sorted(self.hyps, key=lambda h: -h.total))


def write_nbest(path, lists):
    """One line per hypothesis: utt_id rank acoustic ngram tag words..."""
    with open(path, "w", encoding="utf-8") as fh:
        for nb in lists:
            for rank, hyp in enumerate(nb.hyps, 1):
                tag = hyp.tag if hyp.tag is not None else NO_TAG
                fh.write(f"{nb.utt_id} {rank} {hyp.acoustic!r} {hyp.ngram!r} "
                         f"{tag} " + " ".join(hyp.words) + "\n")


def read_nbest(path):
    per_utt = {}
    order = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 5:
                raise ParseError("expected utt rank acoustic ngram tag words",
                                 line=lineno)
            utt_id = parts[0]
            try:
                rank = int(parts[1])
                acoustic = float(parts[2])
                ngram = float(parts[3])
            except ValueError:
                raise ParseError(f"bad numeric field in {line!r}", line=lineno)
            tag = None if parts[4] == NO_TAG else parts[4]
            hyps = per_utt.setdefault(utt_id, [])
            if utt_id not in order:
                order.append(utt_id)
            if rank != len(hyps) + 1:
                raise ParseError(f"rank {rank} out of sequence for {utt_id}",
                                 line=lineno)
            hyps.append(Hypothesis(parts[5:], acoustic, ngram, tag))
    return [NBestList(u, per_utt[u]) for u in order]
