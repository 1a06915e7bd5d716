"""Command-line surface: gen-corpus, train-source, adapt, evaluate,
gradcheck, export-embeddings."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import yaml

from .checkpoint import Bundle
from .config import RunConfig, synthetic_run_config
from .corpus import (
    default_synthetic_spec,
    generate_synthetic,
    parse_corpus,
    spec_from_dict,
    write_corpus,
)
from .errors import ConfigError
from .evaluation import export_embeddings, write_report
from .gradcheck import run_gradcheck
from . import pipeline


def _fail(exc: Exception) -> None:
    click.echo(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
               err=True)
    sys.exit(1)


def _load_config(config_path, seed) -> RunConfig:
    config = RunConfig.from_yaml(config_path) if config_path \
        else synthetic_run_config()
    if seed is not None:
        config = config.with_overrides(seed=seed)
    return config


@click.group()
def main():
    """Cross-domain emotion-cause pair extraction toolkit."""


@main.command("gen-corpus")
@click.argument("out", type=click.Path(dir_okay=False))
@click.option("--spec", "spec_file", type=click.Path(exists=True, dir_okay=False),
              default=None, help="YAML spec file; the default spec otherwise.")
@click.option("--seed", type=int, default=None, help="Override the spec seed.")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="Unused; accepted for CLI uniformity.")
def gen_corpus(out, spec_file, seed, config_path):
    """Generate a synthetic domain-shift corpus (default spec if no file)."""
    try:
        if spec_file:
            with open(spec_file, encoding="utf-8") as f:
                obj = yaml.safe_load(f) or {}
            if seed is not None:
                obj["seed"] = seed
            spec = spec_from_dict(obj)
        else:
            spec = default_synthetic_spec(seed=seed or 0)
        docs = generate_synthetic(spec)
        write_corpus(docs, out)
        click.echo(f"wrote {len(docs)} documents to {out}")
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


@main.command("train-source")
@click.argument("corpus", type=click.Path(exists=True, dir_okay=False))
@click.argument("checkpoint_out", type=click.Path(dir_okay=False))
@click.option("--source-domain", required=True)
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None)
@click.option("--seed", type=int, default=None)
def train_source(corpus, checkpoint_out, source_domain, config_path, seed):
    """Train the emotion and pair models on the source domain."""
    try:
        config = _load_config(config_path, seed)
        docs = parse_corpus(corpus)
        bundle = pipeline.train_source(config, docs, source_domain)
        bundle.save(checkpoint_out)
        click.echo(f"saved checkpoint to {checkpoint_out}")
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


@main.command("adapt")
@click.argument("checkpoint_in", type=click.Path(exists=True, dir_okay=False))
@click.argument("corpus", type=click.Path(exists=True, dir_okay=False))
@click.argument("checkpoint_out", type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None)
@click.option("--seed", type=int, default=None)
@click.option("--max-iter", type=int, default=None,
              help="Relation self-training iterations; 0 disables adaptation.")
@click.option("--gold-emotions", is_flag=True,
              help="Use gold emotion labels instead of the emotion model.")
@click.option("--log-out", type=click.Path(dir_okay=False), default=None,
              help="Per-iteration change log (JSON lines).")
def adapt(checkpoint_in, corpus, checkpoint_out, config_path, seed,
          max_iter, gold_emotions, log_out):
    """Self-train the models on an unlabeled target corpus."""
    try:
        bundle = Bundle.load(checkpoint_in)
        config = RunConfig.from_yaml(config_path) if config_path \
            else bundle.run_config
        if seed is not None:
            config = config.with_overrides(seed=seed)
        docs = parse_corpus(corpus)
        sink = None
        log_file = open(log_out, "w", encoding="utf-8") if log_out else None
        if log_file:
            sink = lambda rec: log_file.write(rec.to_line() + "\n")
        try:
            records = pipeline.adapt(
                bundle, docs, config, max_iter=max_iter,
                use_gold_emotions=gold_emotions, log_sink=sink,
            )
        finally:
            if log_file:
                log_file.close()
        bundle.save(checkpoint_out)
        click.echo(f"ran {len(records)} adaptation iterations; "
                   f"saved checkpoint to {checkpoint_out}")
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


@main.command("evaluate")
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False))
@click.argument("corpus", type=click.Path(exists=True, dir_okay=False))
@click.argument("report_out", type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="Unused; evaluation uses the checkpoint config.")
@click.option("--seed", type=int, default=None)
@click.option("--gold-emotions", is_flag=True)
def evaluate(checkpoint, corpus, report_out, config_path, seed, gold_emotions):
    """Score EE and ECPE on every target domain; write a CSV report."""
    try:
        bundle = Bundle.load(checkpoint)
        if seed is not None:
            bundle.run_config = bundle.run_config.with_overrides(seed=seed)
        docs = parse_corpus(corpus)
        reports = pipeline.evaluate_bundle(bundle, docs,
                                           use_gold_emotions=gold_emotions)
        write_report(reports, report_out)
        for rep in reports:
            click.echo(f"{rep.task} {rep.source}->{rep.target} "
                       f"F1={rep.f1:.4f}")
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


@main.command("gradcheck")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="Unused; the check runs its tiny fixed model.")
@click.option("--seed", type=int, default=0)
@click.option("--step", type=float, default=1e-5)
@click.option("--tolerance", type=float, default=1e-4)
def gradcheck(config_path, seed, step, tolerance):
    """Finite-difference check of the training-loss gradients."""
    try:
        results = run_gradcheck(step=step, seed=seed)
        worst = max(results.values())
        for reg, err in results.items():
            click.echo(f"regularizer={reg} max_rel_err={err:.3e}")
        click.echo(f"max_rel_err={worst:.3e}")
        sys.exit(0 if worst < tolerance else 1)
    except SystemExit:
        raise
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


@main.command("export-embeddings")
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False))
@click.argument("corpus", type=click.Path(exists=True, dir_okay=False))
@click.argument("out", type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="Unused; accepted for CLI uniformity.")
@click.option("--seed", type=int, default=None)
def export_embeddings_cmd(checkpoint, corpus, out, config_path, seed):
    """Export per-pair posterior means with domain labels as CSV."""
    try:
        bundle = Bundle.load(checkpoint)
        docs = parse_corpus(corpus)
        export_embeddings(bundle.pair_model, docs, bundle.vocab, out)
        click.echo(f"wrote embeddings to {out}")
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


if __name__ == "__main__":
    main()
