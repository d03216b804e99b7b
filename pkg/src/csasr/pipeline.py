"""Experiment runner: synthetic corpus to WER table in one call.

Builds the language models and search graphs named by the config, trains
the acoustic model, decodes the shared test set with every single graph
and with their union, rescores with the recurrent LMs (base model for
monolingual tags, CS-adapted model for the "cs" tag), and writes a
per-system WER report grid.  Every artifact lands under the run
directory with a content-hash manifest; reports are byte-stable across
runs of the same config.
"""

import contextlib
import hashlib
import json
import time
import warnings
from pathlib import Path

from .ctc import train_am, write_features, write_labels
from .data import gen_corpus, write_sentences, write_transcripts
from .decode import beam_decode, route_rescore
from .embed import (apply_mapping, normalize, seed_dictionary, self_learn,
                    train_embeddings, write_dictionary, write_embeddings,
                    EmbeddingSpace)
from .errors import CsasrError, DataError
from .fst import write_fst_text
from .graph import (GraphTag, build_grammar_fst, build_lexicon_fst,
                    build_multigraph, build_search_graph, build_token_fst,
                    make_word_table, write_units)
from .ngram import interpolate, train_kn, write_arpa
from .nbest import write_nbest
from .rnnlm import adapt_lm, generate_text, rescore_nbest, train_lm
from .wer import format_report, score_wer


@contextlib.contextmanager
def _stage(name, timings):
    start = time.perf_counter()
    try:
        yield
    except CsasrError as exc:
        raise type(exc)(f"stage {name}: {exc}") from exc
    timings[name] = time.perf_counter() - start


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _interleave(a, b):
    out = []
    for i in range(max(len(a), len(b))):
        if i < len(a):
            out.append(a[i])
        if i < len(b):
            out.append(b[i])
    return out


class ExperimentResult:
    def __init__(self, outdir, rows, reports, nbest, results, timings):
        self.outdir = outdir
        self.rows = rows
        self.reports = reports
        self.nbest = nbest
        self.results = results
        self.timings = timings


def decode_with_retry(graph, grid, decode_cfg, utt_id, max_retries=5):
    """Beam decode; on a dead search double the beam a few times before
    accepting the empty result."""
    beam = decode_cfg["beam"]
    for attempt in range(max_retries + 1):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            nb = beam_decode(graph, grid, beam=beam,
                             acoustic_scale=decode_cfg["acoustic_scale"],
                             n=decode_cfg["nbest"], utt_id=utt_id,
                             max_tokens=decode_cfg["max_tokens"])
        if len(nb) or attempt == max_retries:
            if not len(nb):
                warnings.warn(f"{utt_id}: search empty even at beam {beam}")
            return nb
        beam *= 2.0


def write_data_tree(bundle, d):
    """Persist everything downstream stages read: corpora, lexicon, unit
    inventory, references, and feature/label archives."""
    d = Path(d)
    d.mkdir(parents=True, exist_ok=True)
    for name, sentences in bundle.corpora.items():
        write_sentences(d / f"{name}.txt", sentences)
    bundle.lexicon.write(d / "lexicon.txt")
    write_units(bundle.units, d / "units.txt")
    write_transcripts(d / "test.ref", bundle.test)
    write_transcripts(d / "am_train.ref", bundle.am_train)
    write_features(d / "am_train.feats",
                   {u: bundle.features[u] for u, _ in bundle.am_train})
    write_labels(d / "am_train.labels",
                 {u: bundle.labels[u] for u, _ in bundle.am_train})
    write_features(d / "test.feats",
                   {u: bundle.features[u] for u, _ in bundle.test})


def merged_embedding_space(space_a, space_b):
    """Shared-coordinate vocabulary: both-language words take the target
    side's row."""
    words = sorted(set(space_a.words) | set(space_b.words))
    rows = [space_b.vectors[space_b.index[w]] if w in space_b.index
            else space_a.vectors[space_a.index[w]] for w in words]
    return EmbeddingSpace(words, rows, state=space_a.state)


def map_corpora_embeddings(corpus_m, corpus_n, embed_cfg):
    """Per-language embeddings aligned by self-learning from identical
    surface forms, merged into one shared-coordinate space.

    Returns (mapped_m, mapped_n, shared_space, induced_dictionary).
    """
    dim = embed_cfg["dim"]
    emb_m = normalize(train_embeddings(corpus_m, dim))
    emb_n = normalize(train_embeddings(corpus_n, dim))
    seed = seed_dictionary(emb_m, emb_n)
    w_m, w_n, final_dict, _ = self_learn(
        emb_m, emb_n, seed, {"max_iters": embed_cfg["max_iters"],
                             "mode": embed_cfg["mode"]})
    mapped_m = apply_mapping(emb_m, w_m)
    mapped_n = apply_mapping(emb_n, w_n)
    shared = merged_embedding_space(mapped_m, mapped_n)
    return mapped_m, mapped_n, shared, final_dict


def combined_table(rows, reports):
    subsets = None
    lines = []
    for name in rows:
        rep = reports[name]
        if subsets is None:
            subsets = rep.order
            header = ["system"] + list(subsets)
        cells = [name]
        for sub in subsets:
            wer = rep.subsets[sub].wer
            cells.append("n/a" if wer is None else f"{wer:.2f}")
        lines.append(cells)
    widths = [max(len(r[i]) for r in [header] + lines)
              for i in range(len(header))]
    out = []
    for r in [header] + lines:
        first = r[0].ljust(widths[0])
        rest = [r[i].rjust(widths[i]) for i in range(1, len(r))]
        out.append("  ".join([first] + rest).rstrip())
    return "\n".join(out) + "\n"


def run_experiment(cfg, outdir, log=None):
    say = log if log is not None else (lambda msg: None)
    outdir = Path(outdir)
    for sub in ("data", "lm", "am", "embed", "rnnlm", "graphs", "decode",
                "reports"):
        (outdir / sub).mkdir(parents=True, exist_ok=True)
    timings = {}
    stage_io = {}

    with _stage("gen-data", timings):
        say("gen-data")
        bundle = gen_corpus(cfg.corpus)
        write_data_tree(bundle, outdir / "data")
        stage_io["gen-data"] = {"inputs": ["config"], "outputs": ["data/"]}

    with _stage("train-lm", timings):
        say("train-lm")
        order = cfg.lm["order"]
        lms = {
            "a": train_kn(bundle.corpora["mono_a"], order),
            "b": train_kn(bundle.corpora["mono_b"], order),
            "b10": train_kn(bundle.corpora["mono_b10"], order),
        }
        cs_raw = train_kn(bundle.corpora["cs_train"], order)
        pooled = interpolate(lms["a"], lms["b"], 0.5)
        lms["cs"] = interpolate(cs_raw, pooled, cfg.lm["cs_weight"])
        for name, lm in sorted(lms.items()):
            write_arpa(lm, outdir / "lm" / f"{name}.arpa")
        stage_io["train-lm"] = {"inputs": ["data/"], "outputs": ["lm/"]}

    with _stage("train-am", timings):
        say("train-am")
        dataset = [(u, bundle.features[u], bundle.labels[u])
                   for u, _ in bundle.am_train]
        am_cfg = dict(cfg.am)
        am_cfg["num_units"] = len(bundle.units) - 1
        am, am_history = train_am(dataset, am_cfg)
        am.save(outdir / "am" / "am.npz", extra={"units": bundle.units})
        with open(outdir / "am" / "history.json", "w",
                  encoding="utf-8") as fh:
            json.dump([round(h, 6) for h in am_history], fh, indent=2)
            fh.write("\n")
        stage_io["train-am"] = {"inputs": ["data/"], "outputs": ["am/"]}

    with _stage("map-embed", timings):
        say("map-embed")
        mapped_a, mapped_b, shared_space, final_dict = map_corpora_embeddings(
            bundle.corpora["mono_a"], bundle.corpora["mono_b10"], cfg.embed)
        e = outdir / "embed"
        write_embeddings(e / "alpha.vec", mapped_a)
        write_embeddings(e / "beta.vec", mapped_b)
        write_embeddings(e / "shared.vec", shared_space)
        write_dictionary(e / "induced.tsv",
                         [(mapped_a.words[i], mapped_b.words[j])
                          for i, j in sorted(final_dict.pairs)])
        stage_io["map-embed"] = {"inputs": ["data/"], "outputs": ["embed/"]}

    with _stage("train-rnnlm", timings):
        say("train-rnnlm")
        # the enlarged corpus gives one language ten times the text, so the
        # other side is repeated to keep the training mixture balanced
        base_corpus = _interleave(
            bundle.corpora["mono_a"] * cfg.corpus.b10_factor,
            bundle.corpora["mono_b10"])
        rn_cfg = {k: cfg.rnnlm[k] for k in
                  ("seed", "hidden_dim", "num_layers", "learning_rate",
                   "epochs", "schedule_threshold")}
        base = train_lm(base_corpus, shared_space, rn_cfg)
        adapted = adapt_lm(base, bundle.corpora["cs_train"],
                           {"learning_rate": cfg.rnnlm["adapt_learning_rate"],
                            "epochs": cfg.rnnlm["adapt_epochs"],
                            "decay": cfg.rnnlm["adapt_decay"]})
        base.save(outdir / "rnnlm" / "base.npz")
        adapted.save(outdir / "rnnlm" / "adapted.npz")
        stage_io["train-rnnlm"] = {"inputs": ["data/", "embed/"],
                                   "outputs": ["rnnlm/"]}

    with _stage("gen-text", timings):
        say("gen-text")
        sample = generate_text(adapted, cfg.rnnlm["gen_sentences"],
                               seed=cfg.rnnlm["gen_seed"])
        write_sentences(outdir / "rnnlm" / "sample.txt", sample)
        stage_io["gen-text"] = {"inputs": ["rnnlm/"],
                                "outputs": ["rnnlm/sample.txt"]}

    with _stage("build-graph", timings):
        say("build-graph")
        token = build_token_fst(bundle.units)
        lex_fst = build_lexicon_fst(bundle.lexicon, bundle.units)
        word_table = make_word_table(bundle.lexicon)
        graphs = {}
        for name in cfg.union:
            grammar = build_grammar_fst(lms[name], word_table)
            graphs[name] = build_search_graph(token, lex_fst, grammar)
            if graphs[name].num_states == 0:
                raise DataError(f"search graph {name} is empty")
        # a one-component union degenerates to that component; the tagged
        # multigraph construction itself requires two or more
        if len(cfg.union) > 1:
            union_graph = build_multigraph(
                [(graphs[name], GraphTag(name)) for name in cfg.union])
        else:
            union_graph = graphs[cfg.union[0]]
        g = outdir / "graphs"
        for name, fst in sorted(graphs.items()):
            write_fst_text(fst, g / f"{name}.fst")
        write_fst_text(union_graph, g / "union.fst")
        token.isyms.write(g / "units.syms")
        union_graph.osyms.write(g / "words.syms")
        stage_io["build-graph"] = {"inputs": ["data/", "lm/"],
                                   "outputs": ["graphs/"]}

    with _stage("decode", timings):
        say("decode")
        singles = list(cfg.union)
        nbest = {name: {} for name in singles}
        nbest["union"] = {}
        for utt_id, _ in bundle.test:
            grid = am.posteriors(bundle.features[utt_id])
            for name in singles:
                nbest[name][utt_id] = decode_with_retry(
                    graphs[name], grid, cfg.decode, utt_id)
            if len(singles) > 1:
                nbest["union"][utt_id] = decode_with_retry(
                    union_graph, grid, cfg.decode, utt_id)
            else:
                nbest["union"][utt_id] = nbest[singles[0]][utt_id]
        for name in singles + ["union"]:
            write_nbest(outdir / "decode" / f"{name}.nbest",
                        [nbest[name][u] for u, _ in bundle.test])
        stage_io["decode"] = {"inputs": ["am/", "graphs/", "data/"],
                              "outputs": ["decode/"]}

    with _stage("rescore", timings):
        say("rescore")
        weight = cfg.rescore["weight"]
        space = cfg.rescore["space"]
        models = {name: (adapted if name == "cs" else base)
                  for name in cfg.union}
        ngrams = {name: lms[name] for name in cfg.union}
        ordered = [nbest["union"][u] for u, _ in bundle.test]
        routed = route_rescore(ordered, models, weight, ngrams=ngrams,
                               space=space, default_tag=cfg.union[0])
        nbest["union+rnn"] = {nb.utt_id: nb for nb in routed}
        if "cs" in cfg.union:
            nbest["cs+rnn"] = {}
            for utt_id, _ in bundle.test:
                nb = nbest["cs"][utt_id]
                if len(nb):
                    nb = rescore_nbest(nb, adapted, weight,
                                       ngram=lms["cs"], space=space)
                nbest["cs+rnn"][utt_id] = nb
        for name in sorted(set(nbest) - set(singles) - {"union"}):
            write_nbest(outdir / "decode" / f"{name}.nbest",
                        [nbest[name][u] for u, _ in bundle.test])
        stage_io["rescore"] = {"inputs": ["decode/", "rnnlm/", "lm/"],
                               "outputs": ["decode/"]}

    with _stage("score", timings):
        say("score")
        rows = list(cfg.union)
        if "cs" in cfg.union:
            rows.append("cs+rnn")
        rows += ["union", "union+rnn"]
        refs = {u: words for u, words in bundle.test}
        reports = {}
        results = {"systems": {}, "order": rows}
        for name in rows:
            hyps = {}
            for utt_id, _ in bundle.test:
                nb = nbest[name][utt_id]
                hyps[utt_id] = list(nb.best().words) if len(nb) else []
            rep = score_wer(refs, hyps, bundle.word_lang)
            reports[name] = rep
            results["systems"][name] = rep.to_dict()
            with open(outdir / "reports" / f"{name}.txt", "w",
                      encoding="utf-8") as fh:
                fh.write(format_report(rep))
        with open(outdir / "reports" / "results.txt", "w",
                  encoding="utf-8") as fh:
            fh.write(combined_table(rows, reports))
        with open(outdir / "reports" / "results.json", "w",
                  encoding="utf-8") as fh:
            json.dump(results, fh, indent=2, sort_keys=True)
            fh.write("\n")
        stage_io["score"] = {"inputs": ["decode/", "data/"],
                             "outputs": ["reports/"]}

    with _stage("manifest", timings):
        files = {}
        for path in sorted(outdir.rglob("*")):
            if path.is_file() and path.name != "manifest.json":
                files[path.relative_to(outdir).as_posix()] = _sha256(path)
        manifest = {"stages": stage_io, "files": files}
        with open(outdir / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")

    say("done")
    return ExperimentResult(outdir, rows, reports, nbest, results, timings)
