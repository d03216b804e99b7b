"""Command line front end.

Every subcommand wraps one library call with explicit artifact paths, so
a full experiment can be driven either step by step or in one shot with
run-experiment.  Exit status: 0 on success, 1 on configuration or data
errors, 2 when an internal invariant is violated.
"""

import argparse
import sys

from .config import load_config
from .ctc import AcousticModel, read_features, read_labels, train_am
from .data import gen_corpus, read_sentences, read_transcripts, write_sentences
from .decode import route_rescore
from .embed import write_dictionary, write_embeddings, read_embeddings
from .errors import ConfigError, CsasrError, DataError, InternalError
from .fst import TROPICAL, SymbolTable, read_fst_text, write_fst_text
from .graph import (GraphTag, Lexicon, build_grammar_fst, build_lexicon_fst,
                    build_multigraph, build_search_graph, build_token_fst,
                    make_word_table, read_units)
from .nbest import read_nbest, write_nbest
from .ngram import interpolate, read_arpa, train_kn, write_arpa
from .pipeline import (combined_table, decode_with_retry,
                       map_corpora_embeddings, run_experiment, write_data_tree)
from .rnnlm import RnnLm, adapt_lm, generate_text
from .rnnlm import train_lm as train_rnn_lm
from .wer import format_report, score_wer


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors through the library's exit-code
    discipline instead of calling sys.exit itself."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _read_corpus(paths):
    corpus = []
    for path in paths:
        corpus.extend(read_sentences(path))
    return corpus


def _tagged_paths(pairs, flag):
    out = {}
    for raw in pairs:
        tag, sep, path = raw.partition("=")
        if not sep or not tag or not path:
            raise ConfigError(f"{flag} wants TAG=PATH, got {raw!r}")
        if tag in out:
            raise ConfigError(f"duplicate tag {tag!r} for {flag}")
        out[tag] = path
    return out


def _graph_tables(units_path, lexicon_path):
    units = read_units(units_path)
    lexicon = Lexicon.read(lexicon_path)
    token = build_token_fst(units)
    return units, lexicon, token, make_word_table(lexicon)


def _write_syms(args, isyms, osyms):
    if args.units_syms:
        isyms.write(args.units_syms)
    if args.words_syms:
        osyms.write(args.words_syms)


def cmd_gen_data(args):
    cfg = load_config(args.config)
    write_data_tree(gen_corpus(cfg.corpus), args.out)


def cmd_train_lm(args):
    model = train_kn(_read_corpus(args.text), args.order)
    write_arpa(model, args.out)


def cmd_interp_lm(args):
    mixed = interpolate(read_arpa(args.lm1), read_arpa(args.lm2), args.weight)
    write_arpa(mixed, args.out)


def cmd_train_am(args):
    feats = read_features(args.feats)
    labels = read_labels(args.labels)
    if sorted(feats) != sorted(labels):
        raise DataError("feature and label archives name different "
                        "utterances")
    units = read_units(args.units)
    dataset = [(u, feats[u], labels[u]) for u in sorted(feats)]
    config = {"num_units": len(units) - 1, "seed": args.seed,
              "hidden_dim": args.hidden_dim, "num_layers": args.num_layers,
              "learning_rate": args.learning_rate, "epochs": args.epochs,
              "schedule_threshold": args.schedule_threshold,
              "max_grad_norm": args.max_grad_norm}
    model, _ = train_am(dataset, config)
    model.save(args.out, extra={"units": units})


def cmd_map_embed(args):
    embed_cfg = {"dim": args.dim, "max_iters": args.max_iters,
                 "mode": args.mode}
    mapped_m, mapped_n, shared, final = map_corpora_embeddings(
        _read_corpus(args.text_m), _read_corpus(args.text_n), embed_cfg)
    write_embeddings(args.out_shared, shared)
    if args.out_m:
        write_embeddings(args.out_m, mapped_m)
    if args.out_n:
        write_embeddings(args.out_n, mapped_n)
    if args.out_dict:
        write_dictionary(args.out_dict,
                         [(mapped_m.words[i], mapped_n.words[j])
                          for i, j in sorted(final.pairs)])


def cmd_train_rnnlm(args):
    space = read_embeddings(args.embeddings)
    config = {"seed": args.seed, "hidden_dim": args.hidden_dim,
              "num_layers": args.num_layers,
              "learning_rate": args.learning_rate, "epochs": args.epochs,
              "schedule_threshold": args.schedule_threshold}
    model = train_rnn_lm(_read_corpus(args.text), space, config)
    model.save(args.out)


def cmd_adapt_rnnlm(args):
    model = RnnLm.load(args.model)
    adapted = adapt_lm(model, _read_corpus(args.text),
                       {"learning_rate": args.learning_rate,
                        "epochs": args.epochs, "decay": args.decay})
    adapted.save(args.out)


def cmd_gen_text(args):
    model = RnnLm.load(args.model)
    sample = generate_text(model, args.sentences, seed=args.seed,
                           temperature=args.temperature)
    write_sentences(args.out, sample)


def cmd_build_graph(args):
    units, lexicon, token, word_table = _graph_tables(args.units,
                                                      args.lexicon)
    lex_fst = build_lexicon_fst(lexicon, units)
    grammar = build_grammar_fst(read_arpa(args.lm), word_table)
    graph = build_search_graph(token, lex_fst, grammar)
    write_fst_text(graph, args.out)
    _write_syms(args, graph.isyms, graph.osyms)


def cmd_build_multigraph(args):
    units, lexicon, token, word_table = _graph_tables(args.units,
                                                      args.lexicon)
    paths = _tagged_paths(args.graph, "--graph")
    if len(paths) < 2:
        raise ConfigError("--graph must name at least two components")
    tagged = [(read_fst_text(path, TROPICAL, token.isyms, word_table),
               GraphTag(tag)) for tag, path in paths.items()]
    union = build_multigraph(tagged)
    write_fst_text(union, args.out)
    _write_syms(args, union.isyms, union.osyms)


def cmd_decode(args):
    isyms = SymbolTable.read(args.units_syms)
    osyms = SymbolTable.read(args.words_syms)
    graph = read_fst_text(args.graph, TROPICAL, isyms, osyms)
    am = AcousticModel.load(args.am)
    feats = read_features(args.feats)
    decode_cfg = {"beam": args.beam, "max_tokens": args.max_tokens,
                  "acoustic_scale": args.acoustic_scale,
                  "nbest": args.nbest}
    lists = [decode_with_retry(graph, am.posteriors(feats[u]), decode_cfg, u)
             for u in sorted(feats)]
    write_nbest(args.out, lists)


def cmd_rescore(args):
    models = {tag: RnnLm.load(path)
              for tag, path in _tagged_paths(args.model, "--model").items()}
    ngrams = {tag: read_arpa(path)
              for tag, path in _tagged_paths(args.ngram, "--ngram").items()}
    lists = read_nbest(args.nbest)
    out = route_rescore(lists, models, args.weight, ngrams=ngrams or None,
                        space=args.space, default_tag=args.default_tag)
    write_nbest(args.out, out)


def cmd_score(args):
    refs = dict(read_transcripts(args.ref))
    if (args.hyp is None) == (args.nbest is None):
        raise ConfigError("exactly one of --hyp and --nbest is required")
    if args.hyp is not None:
        hyps = dict(read_transcripts(args.hyp))
    else:
        # an utterance the decoder lost entirely is absent from the n-best
        # file; it scores as an empty hypothesis
        hyps = {u: [] for u in refs}
        hyps.update((nb.utt_id, list(nb.best().words))
                    for nb in read_nbest(args.nbest))
    word_lang = Lexicon.read(args.lexicon).word_lang
    report = score_wer(refs, hyps, word_lang)
    text = format_report(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)


def cmd_run_experiment(args):
    cfg = load_config(args.config)
    log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    result = run_experiment(cfg, args.out, log=log)
    sys.stdout.write(combined_table(result.rows, result.reports))


def build_parser():
    parser = _Parser(prog="csasr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(metavar="COMMAND")

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        return p

    p = command("gen-data", cmd_gen_data,
                "generate the synthetic bilingual corpus and features")
    p.add_argument("--config", required=True, help="experiment INI file")
    p.add_argument("--out", required=True, help="data directory to write")

    p = command("train-lm", cmd_train_lm, "train a Kneser-Ney n-gram model")
    p.add_argument("--text", required=True, action="append",
                   help="training text, one sentence per line (repeatable)")
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--out", required=True, help="ARPA file to write")

    p = command("interp-lm", cmd_interp_lm,
                "interpolate two n-gram models in probability space")
    p.add_argument("--lm1", required=True)
    p.add_argument("--lm2", required=True)
    p.add_argument("--weight", type=float, required=True,
                   help="mixture weight of the first model")
    p.add_argument("--out", required=True)

    p = command("train-am", cmd_train_am, "train the CTC acoustic model")
    p.add_argument("--feats", required=True, help="feature archive (.feats)")
    p.add_argument("--labels", required=True, help="label archive (.labels)")
    p.add_argument("--units", required=True, help="unit inventory file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--hidden-dim", type=int, default=24)
    p.add_argument("--num-layers", type=int, default=1)
    p.add_argument("--learning-rate", type=float, default=0.08)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--schedule-threshold", type=float, default=1e-3)
    p.add_argument("--max-grad-norm", type=float, default=5.0)
    p.add_argument("--out", required=True, help="checkpoint (.npz)")

    p = command("map-embed", cmd_map_embed,
                "map two monolingual embedding spaces into one")
    p.add_argument("--text-m", required=True, action="append",
                   help="source-language text (repeatable)")
    p.add_argument("--text-n", required=True, action="append",
                   help="target-language text (repeatable)")
    p.add_argument("--dim", type=int, default=12)
    p.add_argument("--max-iters", type=int, default=10)
    p.add_argument("--mode", default="forward",
                   help="dictionary induction mode")
    p.add_argument("--out-shared", required=True,
                   help="merged shared-coordinate vocabulary")
    p.add_argument("--out-m", help="mapped source space")
    p.add_argument("--out-n", help="mapped target space")
    p.add_argument("--out-dict", help="induced translation pairs (TSV)")

    p = command("train-rnnlm", cmd_train_rnnlm,
                "train the recurrent LM over frozen embeddings")
    p.add_argument("--text", required=True, action="append")
    p.add_argument("--embeddings", required=True,
                   help="shared embedding space (.vec)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--hidden-dim", type=int, default=64)
    p.add_argument("--num-layers", type=int, default=1)
    p.add_argument("--learning-rate", type=float, default=0.25)
    p.add_argument("--epochs", type=int, default=12)
    p.add_argument("--schedule-threshold", type=float, default=1e-3)
    p.add_argument("--out", required=True)

    p = command("adapt-rnnlm", cmd_adapt_rnnlm,
                "adapt a trained recurrent LM on code-switched text")
    p.add_argument("--model", required=True)
    p.add_argument("--text", required=True, action="append")
    p.add_argument("--learning-rate", type=float, default=0.02)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--decay", type=float, default=0.8)
    p.add_argument("--out", required=True)

    p = command("gen-text", cmd_gen_text,
                "sample sentences from a recurrent LM")
    p.add_argument("--model", required=True)
    p.add_argument("--sentences", type=int, default=40)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--out", required=True)

    p = command("build-graph", cmd_build_graph,
                "compose the token, lexicon, and grammar transducers")
    p.add_argument("--lm", required=True, help="ARPA model for the grammar")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--units", required=True)
    p.add_argument("--out", required=True, help="graph in FST text format")
    p.add_argument("--units-syms", help="write the input symbol table here")
    p.add_argument("--words-syms", help="write the output symbol table here")

    p = command("build-multigraph", cmd_build_multigraph,
                "union component graphs under tagged entry arcs")
    p.add_argument("--graph", required=True, action="append",
                   metavar="TAG=PATH",
                   help="tagged component graph (repeat two or more times)")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--units", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--units-syms", help="write the input symbol table here")
    p.add_argument("--words-syms", help="write the output symbol table here")

    p = command("decode", cmd_decode,
                "beam decode a feature archive against a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--units-syms", required=True,
                   help="input symbol table written at graph build time")
    p.add_argument("--words-syms", required=True,
                   help="output symbol table written at graph build time")
    p.add_argument("--am", required=True, help="acoustic checkpoint (.npz)")
    p.add_argument("--feats", required=True)
    p.add_argument("--beam", type=float, default=12.0)
    p.add_argument("--max-tokens", type=int, default=2000)
    p.add_argument("--acoustic-scale", type=float, default=1.0)
    p.add_argument("--nbest", type=int, default=8)
    p.add_argument("--out", required=True, help="n-best file to write")

    p = command("rescore", cmd_rescore,
                "rescore an n-best file with tag-routed recurrent LMs")
    p.add_argument("--nbest", required=True)
    p.add_argument("--model", required=True, action="append",
                   metavar="TAG=PATH", help="recurrent LM per graph tag")
    p.add_argument("--ngram", required=True, action="append",
                   metavar="TAG=PATH", help="n-gram model per graph tag")
    p.add_argument("--weight", type=float, required=True,
                   help="mixture weight of the recurrent model")
    p.add_argument("--space", default="prob", choices=("prob", "loglin"))
    p.add_argument("--default-tag", default="cs",
                   help="route for hypotheses that carry no tag")
    p.add_argument("--out", required=True)

    p = command("score", cmd_score, "per-language WER report")
    p.add_argument("--ref", required=True, help="reference transcripts")
    p.add_argument("--hyp", help="hypothesis transcripts")
    p.add_argument("--nbest", help="n-best file; rank 1 becomes the "
                   "hypothesis, absent utterances score as empty")
    p.add_argument("--lexicon", required=True,
                   help="lexicon carrying the word-language map")
    p.add_argument("--out", help="also write the report here")

    p = command("run-experiment", cmd_run_experiment,
                "run the whole grid from a config and print the WER table")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--verbose", action="store_true",
                   help="log stage names to stderr")

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        func = getattr(args, "func", None)
        if func is None:
            parser.print_usage(sys.stderr)
            print("error: a subcommand is required", file=sys.stderr)
            return 1
        func(args)
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    except (CsasrError, OSError) as exc:
        # unreadable and unwritable artifact paths rank with config errors
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
