"""Experiment configuration: one INI document, strictly validated.

Every random stage takes its seed from the config; there are no
wall-clock defaults, so a missing seed is a configuration error rather
than a silent irreproducibility.
"""

import configparser
import io

from .data import SyntheticCorpusSpec
from .errors import ConfigError

REQUIRED = object()

KNOWN_LMS = ("cs", "a", "b", "b10")

SCHEMA = {
    "corpus": {
        "seed": (int, REQUIRED),
        "words_per_lang": (int, 110),
        "shared_words": (int, 22),
        "min_word_len": (int, 2),
        "max_word_len": (int, 4),
        "min_sent_len": (int, 3),
        "max_sent_len": (int, 7),
        "branch": (int, 10),
        "mono_a": (int, 350),
        "mono_b": (int, 350),
        "b10_factor": (int, 10),
        "cs_train": (int, 250),
        "test_mono_a": (int, 16),
        "test_mono_b": (int, 16),
        "test_cs": (int, 32),
        "switch_prob": (float, 0.3),
        "am_utts": (int, 90),
        "feat_dim": (int, 10),
        "noise": (float, 0.8),
        "min_dwell": (int, 2),
        "max_dwell": (int, 4),
    },
    "lm": {
        "order": (int, 2),
        "cs_weight": (float, 0.6),
    },
    "am": {
        "seed": (int, REQUIRED),
        "hidden_dim": (int, 24),
        "num_layers": (int, 1),
        "learning_rate": (float, 0.08),
        "epochs": (int, 10),
        "schedule_threshold": (float, 1e-3),
        "max_grad_norm": (float, 5.0),
    },
    "embed": {
        "dim": (int, 12),
        "max_iters": (int, 10),
        "mode": (str, "forward"),
    },
    "rnnlm": {
        "seed": (int, REQUIRED),
        "hidden_dim": (int, 64),
        "num_layers": (int, 1),
        "learning_rate": (float, 0.25),
        "epochs": (int, 12),
        "schedule_threshold": (float, 1e-3),
        "adapt_learning_rate": (float, 0.02),
        "adapt_epochs": (int, 5),
        "adapt_decay": (float, 0.8),
        "gen_sentences": (int, 40),
        "gen_seed": (int, REQUIRED),
    },
    "decode": {
        "beam": (float, 12.0),
        "max_tokens": (int, 2000),
        "acoustic_scale": (float, 1.0),
        "nbest": (int, 8),
    },
    "rescore": {
        "weight": (float, 0.3),
        "space": (str, "prob"),
    },
    "graphs": {
        "union": (str, "cs b10"),
    },
}

REFERENCE_INI = """\
# Reference experiment: every knob the pipeline reads, with the values
# the acceptance run uses.  All seeds are explicit; nothing falls back
# to the clock.

[corpus]
seed = 11
# vocabulary: per-language word count plus the shared (both-language) list
words_per_lang = 110
shared_words = 22
min_word_len = 2
max_word_len = 4
min_sent_len = 3
max_sent_len = 7
# successors per word in the bigram sentence templates
branch = 10
# training text sizes (sentences); the b10 corpus is mono_b * b10_factor
mono_a = 350
mono_b = 350
b10_factor = 10
cs_train = 250
# test composition: monolingual and code-switched utterance counts
test_mono_a = 16
test_mono_b = 16
test_cs = 32
switch_prob = 0.3
# acoustic side: utterances for AM training, feature dim, emission noise
am_utts = 90
feat_dim = 10
noise = 0.8
min_dwell = 2
max_dwell = 4

[lm]
order = 2
# interpolation weight of the raw CS text model against the pooled
# monolingual model when building the cs grammar
cs_weight = 0.6

[am]
seed = 7
hidden_dim = 24
num_layers = 1
learning_rate = 0.08
epochs = 10
schedule_threshold = 1e-3
max_grad_norm = 5.0

[embed]
# embedding training is a deterministic count factorization; no seed
dim = 12
max_iters = 10
mode = forward

[rnnlm]
seed = 5
hidden_dim = 64
num_layers = 1
learning_rate = 0.25
epochs = 12
schedule_threshold = 1e-3
adapt_learning_rate = 0.02
adapt_epochs = 5
adapt_decay = 0.8
# sample emitted by the text-generation stage
gen_sentences = 40
gen_seed = 17

[decode]
beam = 12.0
max_tokens = 2000
acoustic_scale = 1.0
nbest = 8

[rescore]
# mixture weight of the recurrent score against the n-gram score; the
# n-gram dominates because the toy text is itself a bigram draw
weight = 0.3
space = prob

[graphs]
# multigraph components; each name must be one of: cs a b b10
union = cs b10
"""


class ExperimentConfig:
    def __init__(self, sections):
        self.sections = sections
        self.corpus = SyntheticCorpusSpec(**sections["corpus"])
        self.lm = sections["lm"]
        self.am = sections["am"]
        self.embed = sections["embed"]
        self.rnnlm = sections["rnnlm"]
        self.decode = sections["decode"]
        self.rescore = sections["rescore"]
        self.union = sections["graphs"]["union"].split()
        self._validate()

    def _validate(self):
        if not self.union:
            raise ConfigError("graphs.union lists no components")
        if len(set(self.union)) != len(self.union):
            raise ConfigError(f"duplicate union components: {self.union}")
        for name in self.union:
            if name not in KNOWN_LMS:
                raise ConfigError(f"graph tag {name!r} references no defined "
                                  f"LM; known: {' '.join(KNOWN_LMS)}")
        if not 0.0 <= self.rescore["weight"] <= 1.0:
            raise ConfigError("rescore.weight outside [0, 1]")
        if self.rescore["space"] not in ("prob", "loglin"):
            raise ConfigError(f"unknown rescore.space "
                              f"{self.rescore['space']!r}")
        if self.lm["order"] < 1:
            raise ConfigError("lm.order must be at least 1")


def _parse(parser_cls, raw, where):
    try:
        return parser_cls(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {where}")


def load_config_text(text):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}")
    sections = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
    for section, keys in SCHEMA.items():
        out = {}
        present = dict(cp[section]) if cp.has_section(section) else {}
        for key in present:
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
        for key, (parser_cls, default) in keys.items():
            if key in present:
                out[key] = _parse(parser_cls, present[key],
                                  f"{section}.{key}")
            elif default is REQUIRED:
                raise ConfigError(f"missing required key {section}.{key} "
                                  "(seeds are never defaulted)")
            else:
                out[key] = default
        sections[section] = out
    return ExperimentConfig(sections)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    return load_config_text(text)


def make_reference_config():
    return load_config_text(REFERENCE_INI)


def write_reference_config(path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(REFERENCE_INI)
