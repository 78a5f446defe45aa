"""Command-line entry point: ``noteloop index|run|eval|report``."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path
from typing import Optional

import click
import yaml

from .core import RunConfig
from .errors import JudgeParseError, NoteloopError, QualityParseError
from .evaluation import aggregate, judge_answer, judge_reasoning_quality, repeat_summary
from .harness import (
    RESULTS,
    TRACES,
    DatasetSpec,
    RunManifest,
    emit_report,
    load_dataset,
    read_results,
    read_traces,
    record_fixtures,
    run_benchmark,
    write_results,
)
from .llm import Gateway, OpenAIGateway, ResponseCache, current_item, playback_load
from .retrieval import RetrieverSpec, build_retriever
from .retrieval.bm25 import index_corpus
from .retrieval.http import FixtureHttp, LiveHttp

RETRIEVERS = {"wikipedia": "wikipedia_api", "bm25": "bm25_corpus", "dense": "dense_corpus"}


def _load_config(ctx: click.Context, _param, value: Optional[str]):
    if value:
        try:
            data = yaml.safe_load(Path(value).read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise click.BadParameter(str(exc))
        if not isinstance(data, dict):
            raise click.BadParameter("config file must hold a mapping")
        # flags given on the command line still win over these defaults
        ctx.default_map = {str(k).replace("-", "_"): v for k, v in data.items()}
    return value


def _echo_table(directory: Path) -> None:
    click.echo((directory / "table.csv").read_text(encoding="utf-8"), nl=False)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose: bool) -> None:
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
def index(corpus: str) -> None:
    """Build (or refresh) the BM25 index beside a JSONL corpus."""
    path = index_corpus(corpus)
    click.echo(str(path))


def _gateway(playback: Optional[str], cache_dir: Optional[Path]) -> Gateway:
    if playback:
        return playback_load(playback)
    return OpenAIGateway(cache=ResponseCache(cache_dir) if cache_dir else None)


@cli.command()
@click.option("--config", callback=_load_config, is_eager=True, expose_value=False,
              type=click.Path(exists=True, dir_okay=False), help="YAML file with defaults for any flag.")
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", required=True, type=click.Choice(["fanoutqa", "frames", "hotpotqa", "multihoprag"]))
@click.option("--framework", default="react", show_default=True, type=click.Choice(["react", "ircot", "flare"]))
@click.option("--mode", default="notes", show_default=True, type=click.Choice(["baseline", "notes"]))
@click.option("--k", default=5, show_default=True, type=int)
@click.option("--theta", default=0.8, show_default=True, type=float)
@click.option("--max-steps", default=15, show_default=True, type=int)
@click.option("--temperature", default=0.7, show_default=True, type=float)
@click.option("--retriever", default="wikipedia", show_default=True, type=click.Choice(sorted(RETRIEVERS)))
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), help="JSONL corpus for bm25/dense.")
@click.option("--fixtures", type=click.Path(exists=True, dir_okay=False), help="Replay Wikipedia HTTP from this file.")
@click.option("--playback", type=click.Path(exists=True, dir_okay=False), help="Answer LLM calls from this script.")
@click.option("--record", is_flag=True, help="Capture live LLM and HTTP traffic under <out>/fixtures.")
@click.option("--limit", type=int)
@click.option("--repeat", default=1, show_default=True, type=int)
@click.option("--main-model", default="gpt-4o-mini", show_default=True)
@click.option("--notes-model", default=None, help="Defaults to the main model.")
@click.option("--workers", default=4, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(file_okay=False))
def run(dataset, fmt, framework, mode, k, theta, max_steps, temperature, retriever, corpus, fixtures,
        playback, record, limit, repeat, main_model, notes_model, workers, out) -> None:
    """Run one framework over a dataset and write traces plus a report."""
    if record and playback:
        raise click.UsageError("--record needs live calls; drop --playback")
    if repeat < 1:
        raise click.UsageError("--repeat must be >= 1")
    config = RunConfig(framework=framework, mode=mode, k=k, theta=theta, max_steps=max_steps,
                       temperature=temperature, main_model=main_model, notes_model=notes_model)
    spec = DatasetSpec(dataset, fmt, limit)
    items = load_dataset(spec)
    out_dir = Path(out)
    backend = RETRIEVERS[retriever]

    reports = []
    for r in range(1, repeat + 1):
        run_dir = out_dir if repeat == 1 else out_dir / f"r{r}"
        gateway = _gateway(playback, None if playback else run_dir / "cache")
        http = FixtureHttp.load(fixtures) if fixtures else None
        if record:
            live_http = LiveHttp() if backend == "wikipedia_api" and http is None else None
            gateway, rec_http = record_fixtures(gateway, live_http, run_dir / "fixtures")
            http = rec_http or http
        retr = build_retriever(RetrieverSpec(backend, k, corpus), http=http, chunk_words=config.chunk_words)
        manifest = RunManifest.create(config, spec, run_dir, backend, repeat=r if repeat > 1 else None)
        # scripted runs use a frozen clock so traces replay byte for byte
        clock = (lambda: 0.0) if playback else None
        reports.append(run_benchmark(manifest, items, gateway, retr, workers=workers, clock=clock))
        _echo_table(run_dir)
    if repeat > 1:
        summary = repeat_summary(reports)
        (out_dir / "repeat_summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
        click.echo(json.dumps(summary, indent=2))


@cli.command(name="eval")
@click.option("--traces", "run_dir", required=True, type=click.Path(exists=True, file_okay=False),
              help="Run directory holding traces.jsonl.")
@click.option("--judge-model", default="gpt-4o", show_default=True)
@click.option("--quality", is_flag=True, help="Also score reasoning quality per trace.")
@click.option("--playback", type=click.Path(exists=True, dir_okay=False), help="Answer judge calls from this script.")
def eval_cmd(run_dir: str, judge_model: str, quality: bool, playback: Optional[str]) -> None:
    """Judge the answers of a finished run and refresh its report."""
    d = Path(run_dir)
    manifest = RunManifest.load(d)
    items = {i.id: i for i in load_dataset(manifest.dataset)}
    traces = read_traces(d / TRACES)
    results = read_results(d / RESULTS)
    gateway = _gateway(playback, None if playback else d / "cache")
    unjudged = 0
    for r in results:
        if r.failed or r.item_id not in traces:
            continue
        item = items[r.item_id]
        token = current_item.set(r.item_id)
        try:
            try:
                verdict = judge_answer(item.question, r.predicted, item.gold_answers, gateway, model=judge_model)
                r.judge_correct, r.judge_explanation = verdict.correct, verdict.explanation
            except JudgeParseError as exc:
                unjudged += 1
                r.judge_correct, r.judge_explanation = None, f"unjudged: {exc}"
            if quality:
                try:
                    q = judge_reasoning_quality(traces[r.item_id], item.question, gateway, model=judge_model)
                    r.quality = {"efficiency": q.efficiency, "redundancy": q.redundancy, "coherence": q.coherence}
                except QualityParseError as exc:
                    click.echo(f"{r.item_id}: quality not scored ({exc})", err=True)
        finally:
            current_item.reset(token)
    write_results(d / RESULTS, results)
    emit_report(aggregate(results, manifest.report_config()), d)
    if unjudged:
        click.echo(f"{unjudged} item(s) unjudged", err=True)
    _echo_table(d)


@cli.command()
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True, file_okay=False))
def report(run_dir: str) -> None:
    """Recompute report.json and table.csv from a run's stored results."""
    d = Path(run_dir)
    manifest = RunManifest.load(d)
    emit_report(aggregate(read_results(d / RESULTS), manifest.report_config()), d)
    _echo_table(d)


def main(argv: Optional[list[str]] = None) -> int:
    try:
        cli.main(args=argv, prog_name="noteloop", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except NoteloopError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
