"""Bilingual code-switching ASR back-end.

CTC acoustic modeling over bidirectional LSTMs, WFST decoding graphs built
from token/lexicon/grammar transducers (including tagged multi-graph
unions), interpolated Kneser-Ney n-gram models, LSTM language models over
cross-lingually mapped embeddings with n-best rescoring, and WER scoring
broken down by utterance language.
"""

__version__ = "0.1.0"
