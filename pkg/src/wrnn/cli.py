"""
Command-line entry point: ``wrnn {prepare,embed,train,eval,gradcheck,report,synth}``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
"""

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import (__version__, _accel, config, corpus, embeddings, evaluation, gradcheck, kernels, models,
               synthetic, training)
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import ConfigError, DataError, NumericalError, WrnnError
from .numerics import derive_seed, init_matrix, make_rng

log = logging.getLogger("wrnn")

DISPLAY_NAMES = {"wrnn": "W-RNN", "rnn_last": "RNN", "birnn": "Bi-RNN", "dnn": "DNN"}


# ---------------------------------------------------------------- prepared-data files


def write_encoded(path, ids, labels):
    with open(path, "w", newline="\n") as fh:
        for label, row in zip(labels, ids):
            fh.write(f"{int(label)}\t{' '.join(map(str, row))}\n")


def read_encoded(path):
    labels, rows = [], []
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                label, _, rest = line.rstrip("\n").partition("\t")
                labels.append(int(label))
                rows.append([int(t) for t in rest.split()] if rest else [])
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    except ValueError:
        raise DataError(f"{path}:{lineno}: malformed line") from None
    return rows, np.array(labels, dtype=np.int64)


def write_kv(path, values):
    with open(path, "w", newline="\n") as fh:
        for k, v in values.items():
            fh.write(f"{k} = {v}\n")


def read_kv(path):
    out = {}
    try:
        with open(path) as fh:
            for line in fh:
                k, sep, v = line.partition("=")
                if sep:
                    out[k.strip()] = v.strip()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}; run 'wrnn prepare' first") from None
    return out


class Prepared:
    """Everything ``prepare`` left in the output directory."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.info = read_kv(self.dir / "prepare.cfg")
        self.vocab = corpus.Vocabulary.load(self.dir / "vocab.txt")
        self.categories = self.info["categories"].split(",")
        self.sl = int(self.info["sl"])
        if self.vocab.content_hash() != self.info["vocab_hash"]:
            raise DataError(f"{self.dir}: vocabulary file does not match prepare.cfg")

    def split(self, name):
        rows, labels = read_encoded(self.dir / f"{name}.tsv")
        ids = np.array(rows, dtype=np.int64).reshape(len(rows), self.sl)
        return ids, labels

    def token_docs(self):
        rows, _ = read_encoded(self.dir / "tokens.tsv")
        return [np.array(r, dtype=np.int64) for r in rows]


# ---------------------------------------------------------------- commands


def cmd_prepare(cfg):
    if not cfg.data_root:
        raise ConfigError("prepare needs data_root")
    docs, names = corpus.load_dataset(cfg.data_root, cfg.category_list())
    stats = corpus.length_stats([d.length for d in docs], cfg.theta)
    sl = cfg.sl or stats.sl
    train_docs, test_docs = corpus.split_dataset(docs, cfg.test_fraction, derive_seed(cfg.seed, "split"))
    vocab = corpus.build_vocabulary(train_docs, cfg.min_count)

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vocab.save(out / "vocab.txt")
    stats.write_csv(out / "lengths.csv")
    for name, part in (("train", train_docs), ("test", test_docs)):
        ids = [corpus.encode_document(d, vocab, sl) for d in part]
        write_encoded(out / f"{name}.tsv", ids, [d.label for d in part])
    write_encoded(out / "tokens.tsv", [corpus.encode_tokens(d.tokens, vocab) for d in train_docs],
                  [d.label for d in train_docs])
    info = {
        "sl": sl, "sl_selected": stats.sl, "theta": cfg.theta, "seed": cfg.seed,
        "n_documents": len(docs), "n_train": len(train_docs), "n_test": len(test_docs),
        "vocab_size": len(vocab), "vocab_hash": vocab.content_hash(), "min_count": cfg.min_count,
        "tokenizer": corpus.TOKENIZER_RULE, "categories": ",".join(names),
    }
    write_kv(out / "prepare.cfg", info)
    print(f"prepared {len(docs)} documents in {len(names)} categories: SL={sl} "
          f"(theta {cfg.theta} selects {stats.sl}), vocabulary {len(vocab)}, "
          f"train {len(train_docs)} / test {len(test_docs)} -> {out}")
    return 0


def cmd_embed(cfg):
    prep = Prepared(cfg.out_dir)
    target = prep.dir / "embeddings.txt"
    if cfg.embed_source == "train":
        emb, losses = embeddings.train_skipgram(
            prep.token_docs(), len(prep.vocab), dim=cfg.embed_dim, window=cfg.sg_window,
            negatives=cfg.sg_negatives, epochs=cfg.sg_epochs, lr=cfg.sg_lr,
            seed=derive_seed(cfg.seed, "embed"), return_losses=True)
        print("skip-gram loss per epoch: " + ", ".join(f"{v:.4f}" for v in losses))
    elif cfg.embed_source == "load":
        emb = embeddings.load_embeddings(cfg.embed_path, prep.vocab,
                                         make_rng(cfg.seed, "embed-fallback"), dim=cfg.embed_dim)
    else:
        rng = make_rng(cfg.seed, "embed")
        table = init_matrix(len(prep.vocab), cfg.embed_dim, "xavier_uniform", rng)
        table[corpus.PAD_ID] = 0.0
        emb = embeddings.EmbeddingMatrix(table=table)
    embeddings.save_word2vec(target, emb, prep.vocab)
    print(f"wrote {emb.vocab_size - 1} x {emb.dim} vectors to {target}")
    return 0


def _run_dir(cfg):
    return Path(cfg.out_dir) / cfg.kind


def cmd_train(cfg):
    prep = Prepared(cfg.out_dir)
    train_ids, train_labels = prep.split("train")
    test_ids, test_labels = prep.split("test")
    spec = cfg.model_spec(prep.sl, len(prep.vocab), len(prep.categories))
    rng = make_rng(cfg.seed, "init")
    table = None
    if cfg.embed_source != "random":
        path = prep.dir / "embeddings.txt"
        if not path.exists():
            raise DataError(f"{path} not found; run 'wrnn embed' first or set embed_source = random")
        table = embeddings.load_embeddings(path, prep.vocab, make_rng(cfg.seed, "embed-fallback"),
                                           dim=cfg.embed_dim).table
    params = models.init_params(spec, rng, table)
    run = _run_dir(cfg)
    run.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = training.train(spec, params, train_ids, train_labels, cfg.train_config(),
                            test_ids, test_labels)
    elapsed = time.perf_counter() - t0
    vh = prep.vocab.content_hash()
    save_checkpoint(run / "checkpoint.bin", result.best_params, spec, vh,
                    meta={"epoch": result.best_epoch})
    save_checkpoint(run / "last.bin", result.params, spec, vh, meta={"epoch": cfg.epochs})
    result.history.write_csv(run / "history.csv")
    with open(run / "timing.txt", "w") as fh:
        fh.write(f"backend = {kernels.BACKEND}\nseconds = {elapsed:.2f}\n")
        for row in result.history.rows:
            fh.write(f"epoch_{row.epoch}_seconds = {row.seconds:.2f}\n")
    if result.history.rows:
        last = result.history.rows[-1]
        print(f"{DISPLAY_NAMES[cfg.kind]}: {len(result.history)} epochs in {elapsed:.1f}s; "
              f"final train acc {last.train_accuracy:.4f}, test acc {last.test_accuracy:.4f}; "
              f"best epoch {result.best_epoch} -> {run / 'checkpoint.bin'}")
    else:
        print(f"{DISPLAY_NAMES[cfg.kind]}: 0 epochs; wrote initial parameters to {run / 'checkpoint.bin'}")
    return 0


def cmd_eval(cfg, checkpoint=None, split="test", name=None):
    prep = Prepared(cfg.out_dir)
    path = Path(checkpoint) if checkpoint else _run_dir(cfg) / "checkpoint.bin"
    params, spec, meta = load_checkpoint(path, vocab_hash=prep.vocab.content_hash())
    if spec.seq_len != prep.sl:
        raise DataError(f"checkpoint expects SL={spec.seq_len}, prepared data has {prep.sl}")
    ids, labels = prep.split(split)
    loss, acc, preds, losses = training.evaluate(spec, params, ids, labels)
    report = evaluation.metrics(evaluation.confusion(preds, labels, spec.n_classes), losses)
    name = name or DISPLAY_NAMES[spec.kind]
    rows = evaluation.compare_models([(name, report)])
    out = path.parent
    evaluation.write_report_csv(out / f"metrics_{split}.csv", rows)
    evaluation.write_per_class_csv(out / f"per_class_{split}.csv", name, report, prep.categories)
    print(f"{name} on {split} ({len(labels)} documents): {report.summary()}")
    if report.zero_division:
        print("note: some class had no predictions or no examples; its 0/0 metrics are reported as 0")
    return 0


def cmd_gradcheck(seed=0, corrupt=()):
    t0 = time.perf_counter()
    results = gradcheck.run_gradcheck(seed=seed, corrupt=corrupt)
    print(gradcheck.format_results(results))
    failed = [r.component for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} components passed in "
          f"{time.perf_counter() - t0:.1f}s")
    if failed:
        raise NumericalError("gradient check failed: " + ", ".join(failed))
    return 0


def cmd_report(files, output=None, reference=False):
    if not files:
        raise ConfigError("report needs at least one metrics file")
    rows = []
    for f in files:
        rows.extend(evaluation.read_report_csv(f))
    means, stds = evaluation.aggregate_rows(rows)
    text = evaluation.render_table(means)
    if any(s[-1] > 1 for s in stds):
        text += "\n\nstandard deviation over runs:\n" + evaluation.render_table(
            [s[:-1] for s in stds], header=evaluation.REPORT_HEADER)
        text += "\nruns per model: " + ", ".join(f"{s[0]}={s[-1]}" for s in stds)
    if reference:
        ref = [(k, *v) for k, v in evaluation.REFERENCE_RESULTS.items()]
        text += "\n\nreference (20 categories, full scale):\n" + evaluation.render_table(
            ref, header=["model", "precision", "recall", "f1", "loss"])
    print(text)
    if output:
        evaluation.write_report_csv(f"{output}.csv", means)
        Path(f"{output}.txt").write_text(text + "\n")
    return 0


def cmd_synth(out, n_docs, length, seed):
    docs = synthetic.marker_corpus(n_docs, length, seed=seed)
    synthetic.write_dataset(out, docs)
    print(f"wrote {len(docs)} marker-token documents to {out}")
    return 0


# ---------------------------------------------------------------- argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _config_flags():
    p = _Parser(add_help=False)
    g = p.add_argument_group("configuration (defaults < preset < --config file < flags)")
    g.add_argument("--config", dest="config_file", default=None, metavar="PATH")
    for key, typ in config.FIELD_TYPES.items():
        flags = [f"--{key}"] + ([f"--{key.replace('_', '-')}"] if "_" in key else [])
        if typ is bool:
            g.add_argument(*flags, dest=key, nargs="?", const="true", default=None, metavar="BOOL")
        elif key == "preset":
            g.add_argument(*flags, dest=key, choices=sorted(config.PRESETS), default=None)
        else:
            g.add_argument(*flags, dest=key, default=None, metavar=typ.__name__.upper())
    return p


def build_parser():
    common = _config_flags()
    parser = _Parser(prog="wrnn", description="Weighted-RNN text classification toolkit")
    parser.add_argument("--version", action="version", version=f"wrnn {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("prepare", parents=[common], help="tokenise, build vocabulary, choose SL, split")
    sub.add_parser("embed", parents=[common], help="train or load word vectors")
    sub.add_parser("train", parents=[common], help="train one model kind")
    ev = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    ev.add_argument("--checkpoint", default=None)
    ev.add_argument("--split", choices=("train", "test"), default="test")
    ev.add_argument("--name", default=None, help="model name used in the report rows")
    gc = sub.add_parser("gradcheck", help="finite-difference check of every gradient")
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--corrupt", action="append", default=[], choices=gradcheck.COMPONENTS,
                    help="negative control: perturb this component's analytic gradient")
    rp = sub.add_parser("report", help="merge metrics CSVs into a comparison table")
    rp.add_argument("files", nargs="+")
    rp.add_argument("--output", default=None, help="write OUTPUT.csv and OUTPUT.txt")
    rp.add_argument("--reference", action="store_true", help="append the published reference rows")
    sy = sub.add_parser("synth", help="write the marker-token dataset")
    sy.add_argument("out")
    sy.add_argument("--n_docs", "--n-docs", type=int, default=200)
    sy.add_argument("--length", type=int, default=20)
    sy.add_argument("--seed", type=int, default=1)
    return parser


def load_config(args):
    file_values = config.read_config_file(args.config_file) if args.config_file else {}
    flags = {k: getattr(args, k) for k in config.FIELD_TYPES if hasattr(args, k)}
    return config.resolve(file_values, flags)


def _apply_threads(cfg):
    if cfg.deterministic:
        _accel.set_threads(1)
    else:
        _accel.set_threads(cfg.threads or os.cpu_count() or 1)


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    if args.command == "gradcheck":
        return cmd_gradcheck(args.seed, args.corrupt)
    if args.command == "report":
        return cmd_report(args.files, args.output, args.reference)
    if args.command == "synth":
        return cmd_synth(args.out, args.n_docs, args.length, args.seed)
    cfg = load_config(args)
    _apply_threads(cfg)
    if args.command == "prepare":
        return cmd_prepare(cfg)
    if args.command == "embed":
        return cmd_embed(cfg)
    if args.command == "train":
        return cmd_train(cfg)
    return cmd_eval(cfg, args.checkpoint, args.split, args.name)


def main(argv=None):
    try:
        return run(argv)
    except WrnnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    except FloatingPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NumericalError.exit_code


if __name__ == "__main__":
    sys.exit(main())
