"""Command-line entry point: wavesp <verb> [options]."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from . import db
from .autodiff import NumericalInstabilityError
from .checkpoint import load_checkpoint
from .config import ExperimentConfig, full_scale, load_config
from .data import synth_corpus, write_corpus
from .metrics import EvalReport, format_params, format_report
from .model import WaveSPNet, closed_form_counts, count_params
from .trainer import AXES, CHECKPOINT_NAME, ablate, evaluate, export_embeddings, train
from .wavelet_prompt import VARIANTS

console = Console()
logger = logging.getLogger("wavesp")


def _setup_logging(verbose: bool) -> None:
    # All logging to stderr (stdout carries reports and tables)
    handler = RichHandler(console=Console(stderr=True), show_path=False)
    logger.handlers[:] = [handler]
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    logger.propagate = False


def _parse_values(selection: str, axis: str) -> list:
    """Parse ablation values like '0.1,0.5,0.9', '2-10' or 'fixed,learnable'."""
    values: list = []
    for part in selection.split(","):
        part = part.strip()
        if not part:
            continue
        if axis == "m" and "-" in part:
            a, b = part.split("-", 1)
            values.extend(range(int(a), int(b) + 1))
        elif axis == "m":
            values.append(int(part))
        elif axis == "rho":
            values.append(float(part))
        else:
            values.append(part)
    return values


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.out is not None:
        cfg = cfg.replace(out=str(args.out))
    if getattr(args, "corpus", None):
        cfg = cfg.with_values("data", corpus=str(args.corpus))
    return cfg.validate()


def _checkpoint_path(args, cfg: ExperimentConfig) -> Path:
    return Path(args.checkpoint) if args.checkpoint else Path(cfg.out) / CHECKPOINT_NAME


def _report_table(title: str, rows: list[tuple[str, EvalReport]], key: str) -> Table:
    table = Table(title=title)
    table.add_column("#", style="cyan", width=4)
    table.add_column(key, width=14)
    table.add_column("EER (%)", justify="right")
    table.add_column("± CI", justify="right")
    table.add_column("ACC", justify="right")
    table.add_column("F1", justify="right")
    table.add_column("AUC", justify="right")
    table.add_column("n_r / n_f", justify="right")
    for i, (name, r) in enumerate(rows, 1):
        table.add_row(
            str(i),
            name,
            f"{100 * r.eer:.2f}",
            f"{100 * r.eer_ci_halfwidth:.2f}",
            f"{r.acc:.4f}",
            f"{r.f1:.4f}",
            f"{r.auc:.4f}",
            f"{r.n_r} / {r.n_f}",
        )
    return table


# ── Verbs ─────────────────────────────────────────────────────────────────────


def cmd_gen_corpus(args) -> None:
    cfg = _resolve_config(args)
    out = Path(args.out or cfg.data.corpus)
    manifest = write_corpus(synth_corpus(cfg.corpus_spec()), out)
    console.print(f"  [green]✓[/green] Corpus written: {manifest}")


def cmd_train(args) -> None:
    cfg = _resolve_config(args)
    ckpt = train(cfg, out_dir=Path(cfg.out))
    console.print(
        f"  [green]✓[/green] Best dev EER {100 * ckpt.best_dev_eer:.2f}% at epoch {ckpt.best_epoch}; "
        f"checkpoint in {Path(cfg.out) / CHECKPOINT_NAME}"
    )


def cmd_eval(args) -> None:
    cfg = _resolve_config(args)
    ckpt = load_checkpoint(_checkpoint_path(args, cfg))
    corpus = Path(args.corpus) if args.corpus else None
    out_dir = Path(args.out) if args.out else _checkpoint_path(args, cfg).parent
    report, _ = evaluate(ckpt, args.split, out_dir=out_dir, corpus=corpus)
    console.print(_report_table(f"Evaluation on {args.split}", [(ckpt.config.prompt.variant, report)], "Variant"))
    sys.stdout.write(format_report(report, args.split))


def cmd_ablate(args) -> None:
    cfg = _resolve_config(args)
    values = _parse_values(args.values, args.axis)
    out_dir = Path(cfg.out) / "ablation"
    results = ablate(cfg, args.axis, values, out_dir)
    console.print(_report_table(f"Ablation over {args.axis}", results, args.axis))
    console.print(f"  [green]✓[/green] Table written: {out_dir / f'ablation_{args.axis}.tsv'}")


def cmd_export_emb(args) -> None:
    cfg = _resolve_config(args)
    ckpt = load_checkpoint(_checkpoint_path(args, cfg))
    corpus = Path(args.corpus) if args.corpus else None
    path = Path(args.path or Path(cfg.out) / f"embeddings_{args.split}.txt")
    utt_ids, labels, vectors = export_embeddings(ckpt, args.split, path, corpus=corpus)
    console.print(f"  [green]✓[/green] {len(utt_ids)} embeddings written to {path}")
    if args.index:
        store = Path(cfg.out) / "chromadb_data"
        count = db.index_embeddings(args.split, utt_ids, labels, vectors, store)
        console.print(f"  [green]✓[/green] Indexed into collection embeddings_{args.split} ({count} vectors)")
        purity = db.label_purity(args.split, args.n, store)
        console.print(f"  {args.n}-NN label purity: {purity:.3f}")


def cmd_neighbors(args) -> None:
    cfg = _resolve_config(args)
    items = db.neighbors(args.split, args.utt_id, args.n, Path(cfg.out) / "chromadb_data")
    if not items:
        console.print(f"[yellow]Collection embeddings_{args.split} is empty. Run export-emb --index first.[/yellow]")
        return
    table = Table(title=f"Nearest neighbours of {args.utt_id}")
    table.add_column("#", style="cyan", width=4)
    table.add_column("Utterance", width=28)
    table.add_column("Label", width=10)
    table.add_column("Distance", justify="right")
    for i, item in enumerate(items, 1):
        table.add_row(str(i), item["id"], item["label"], f"{item['distance']:.4f}")
    console.print(table)


def _variant_configs(cfg: ExperimentConfig) -> list[tuple[str, ExperimentConfig]]:
    """The configured prompt length under every variant that admits it."""
    p, m = cfg.prompt.p, cfg.prompt.m
    runs = []
    for variant in VARIANTS:
        vm = p if variant in ("WPT", "WSPT") else m
        if variant == "PartialWSPT" and not 0 < vm < p:
            continue
        runs.append((variant, cfg.with_values("prompt", variant=variant, m=vm)))
    return runs


def cmd_params(args) -> None:
    cfg = full_scale() if args.full else _resolve_config(args)
    table = Table(title="Parameters (% of total)")
    table.add_column("#", style="cyan", width=4)
    table.add_column("Variant", width=14)
    table.add_column("Trainable", justify="right")
    table.add_column("Total", justify="right")
    table.add_column("Params", justify="right")
    for i, (name, run) in enumerate(_variant_configs(cfg), 1):
        if args.full:
            trainable, total, percent = closed_form_counts(run)
        else:
            trainable, total, percent = count_params(WaveSPNet(run))
        table.add_row(str(i), name, f"{trainable:,}", f"{total:,}", format_params(trainable, percent))
    console.print(table)


# ── Parser ────────────────────────────────────────────────────────────────────


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config file (INI sections)")
    common.add_argument("--seed", type=int, help="override the experiment seed")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--verbose", "-v", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="wavesp", description="Wavelet-sparse prompt tuning for spoof detection")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("gen-corpus", parents=[common], help="synthesise the bonafide/spoof corpus")
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("train", parents=[common], help="train prompts, filters and classifier")
    p.add_argument("--corpus", type=Path, help="corpus directory (overrides [data] corpus)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="score a split with a checkpoint")
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--split", choices=["dev", "eval"], default="eval")
    p.add_argument("--corpus", type=Path)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", parents=[common], help="one training per value of an ablation axis")
    p.add_argument("axis", choices=AXES)
    p.add_argument("values", help="comma list, e.g. 0.1,0.5,0.9 or 2-10 or no_lwd,no_wds,no_lwr")
    p.add_argument("--corpus", type=Path)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("export-emb", parents=[common], help="write pooled utterance embeddings")
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--split", choices=["train", "dev", "eval"], default="eval")
    p.add_argument("--corpus", type=Path)
    p.add_argument("--path", type=Path, help="embedding file (default: <out>/embeddings_<split>.txt)")
    p.add_argument("--index", action="store_true", help="also index vectors into ChromaDB")
    p.add_argument("-n", type=int, default=5, help="neighbours per utterance for the purity check")
    p.set_defaults(func=cmd_export_emb)

    p = sub.add_parser("neighbors", parents=[common], help="nearest indexed utterances to one utterance")
    p.add_argument("utt_id")
    p.add_argument("--split", choices=["train", "dev", "eval"], default="eval")
    p.add_argument("-n", type=int, default=5)
    p.set_defaults(func=cmd_neighbors)

    p = sub.add_parser("params", parents=[common], help="trainable / total parameter counts")
    p.add_argument("--full", action="store_true", help="closed-form counts at the full-scale configuration")
    p.set_defaults(func=cmd_params)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        args.func(args)
    except (ValueError, FileNotFoundError, NumericalInstabilityError) as e:
        console.print(f"  [red]✗[/red] {escape(str(e))}")
        raise SystemExit(1) from None
    return 0


if __name__ == "__main__":
    main()
