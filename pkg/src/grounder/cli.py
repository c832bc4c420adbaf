"""Operator command line: ingest, train, index, retrieve, evaluate, chat, serve.

All output is line-oriented JSON for scriptability. Exit codes: 0 success,
1 usage error, 2 data error, 3 provider error. Every run echoes the
resolved seed as its first output line.

Artifacts live in a workspace directory (default "."): corpus.jsonl,
dialogues.jsonl, model.bin, index.bin, bm25.bin, plus grounder.json for
training configuration overrides.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys
from pathlib import Path

import click

from . import synth
from .corpus import (
    CorpusError,
    corpus_by_id,
    load_corpus,
    load_dialogues,
    save_corpus,
    save_dialogues,
)
from .encoder import ModelError, encode, init_dual_encoder, load_model, save_model
from .index import IndexError_, build_index, load_index, model_fingerprint, save_index, search
from .metrics import EvalError, run_dialogue_eval, run_retrieval_eval
from .responder import Engine, Mode, ProviderError, answer_turn, provider_from_env, GenerationProvider
from .sparse import Bm25Error, build_bm25, load_bm25, save_bm25
from .text_features import load_stopwords
from .tracker import DialogueHistory
from .training import TrainConfig, TrainingError, train_ranker, train_retriever

DATA_ERRORS = (
    CorpusError,
    Bm25Error,
    IndexError_,
    ModelError,
    TrainingError,
    EvalError,
    FileNotFoundError,
    json.JSONDecodeError,
)


def emit(obj: dict) -> None:
    click.echo(json.dumps(obj, ensure_ascii=False))


class Workspace:
    def __init__(self, root: str):
        self.root = Path(root)

    def path(self, name: str) -> Path:
        return self.root / name

    def require(self, name: str, hint: str) -> Path:
        p = self.path(name)
        if not p.exists():
            raise CorpusError(f"{p} not found; {hint}")
        return p

    def load_config(self, config_path: str | None) -> TrainConfig:
        if config_path:
            return TrainConfig.from_json(config_path)
        default = self.path("grounder.json")
        if default.exists():
            return TrainConfig.from_json(default)
        return TrainConfig()


pass_workspace = click.make_pass_decorator(Workspace)


@click.group()
@click.option("--workspace", "-w", default=".", show_default=True, help="Artifact directory.")
@click.pass_context
def cli(ctx, workspace):
    """Grounded conversational-tables engine."""
    ctx.obj = Workspace(workspace)


@cli.command()
@click.option("--out", default="demo", show_default=True, help="Output directory.")
def demo(out):
    """Generate the synthetic demo corpus, queries, and dialogues."""
    emit({"event": "seed", "seed": 0})
    paths = synth.write_demo(out)
    emit({"event": "demo_written", "files": {k: str(v) for k, v in paths.items()}})


@cli.command()
@click.option("--tables", required=True, type=click.Path(exists=True))
@click.option("--dialogues", type=click.Path(exists=True))
@pass_workspace
def ingest(ws, tables, dialogues):
    """Validate and normalize corpus (and optional dialogue) files into the workspace."""
    emit({"event": "seed", "seed": 0})
    corpus = load_corpus(tables)
    ws.root.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, ws.path("corpus.jsonl"))
    emit({"event": "ingested_tables", "count": len(corpus)})
    if dialogues:
        records = load_dialogues(dialogues)
        save_dialogues(records, ws.path("dialogues.jsonl"))
        emit({"event": "ingested_dialogues", "count": len(records)})


def _train_common(ws, config, seed):
    cfg = ws.load_config(config)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    emit({"event": "seed", "seed": cfg.seed})
    corpus = load_corpus(ws.require("corpus.jsonl", "run ingest first"))
    return cfg, corpus


@cli.command("train-retriever")
@click.option("--pairs", type=click.Path(exists=True), help="JSONL of {query, table_id}; defaults to <workspace>/train_pairs.jsonl.")
@click.option("--config", type=click.Path(exists=True), help="Training config JSON.")
@click.option("--seed", type=int, default=None)
@pass_workspace
def train_retriever_cmd(ws, pairs, config, seed):
    """Train the dual-encoder table retriever with in-batch negatives."""
    cfg, corpus = _train_common(ws, config, seed)
    pairs_path = Path(pairs) if pairs else ws.require("train_pairs.jsonl", "supply --pairs")
    training_pairs = synth.load_pairs(pairs_path)
    de = init_dual_encoder(V=cfg.V, d=cfg.d, ngram_max=cfg.ngram_max, seed=cfg.seed)
    de = train_retriever(de, training_pairs, corpus, cfg, log_path=ws.path("retriever_train_log.jsonl"))
    save_model(de, ws.path("model.bin"))
    emit({"event": "model_saved", "path": str(ws.path("model.bin")), "pairs": len(training_pairs)})


@cli.command("train-ranker")
@click.option("--dialogues", type=click.Path(exists=True), help="Dialogue JSONL; defaults to <workspace>/dialogues.jsonl.")
@click.option("--config", type=click.Path(exists=True), help="Training config JSON.")
@click.option("--seed", type=int, default=None)
@pass_workspace
def train_ranker_cmd(ws, dialogues, config, seed):
    """Train the cell-ranking encoder pair with the triplet margin objective."""
    cfg, corpus = _train_common(ws, config, seed)
    dlg_path = Path(dialogues) if dialogues else ws.require("dialogues.jsonl", "supply --dialogues")
    records = load_dialogues(dlg_path)
    de = init_dual_encoder(V=cfg.V, d=cfg.d, ngram_max=cfg.ngram_max, seed=cfg.seed)
    de = train_ranker(de, records, corpus, cfg, log_path=ws.path("ranker_train_log.jsonl"))
    save_model(de, ws.path("ranker.bin"))
    emit({"event": "model_saved", "path": str(ws.path("ranker.bin")), "dialogues": len(records)})


@cli.command("build-index")
@pass_workspace
def build_index_cmd(ws):
    """Embed every table with the trained model and persist the dense + BM25 indices."""
    emit({"event": "seed", "seed": 0})
    corpus = load_corpus(ws.require("corpus.jsonl", "run ingest first"))
    model_path = ws.require("model.bin", "run train-retriever first")
    de = load_model(model_path)
    idx = build_index(de, corpus, fingerprint=model_fingerprint(model_path))
    save_index(idx, ws.path("index.bin"))
    bm25 = build_bm25(corpus)
    save_bm25(bm25, ws.path("bm25.bin"))
    emit({"event": "index_built", "tables": idx.n, "d": idx.d})


def _load_engine(ws, provider_kind="mock", need_ranker=False) -> Engine:
    corpus = load_corpus(ws.require("corpus.jsonl", "run ingest first"))
    model_path = ws.require("model.bin", "run train-retriever first")
    de = load_model(model_path)
    index_path = ws.require("index.bin", "run build-index first")
    idx = load_index(index_path, expected_fingerprint=model_fingerprint(model_path))
    bm25 = load_bm25(ws.path("bm25.bin")) if ws.path("bm25.bin").exists() else None
    ranker = load_model(ws.path("ranker.bin")) if ws.path("ranker.bin").exists() else de
    provider = (
        provider_from_env("http") if provider_kind == "http" else GenerationProvider(kind="mock")
    )
    return Engine(
        encoder=ranker if need_ranker else de,
        corpus=corpus_by_id(corpus),
        dense=idx,
        bm25=bm25,
        stopwords=load_stopwords(),
        provider=provider,
    )


@cli.command()
@click.option("--query", required=True)
@click.option("-k", default=3, show_default=True)
@click.option("--sparse", is_flag=True, help="Use the BM25 baseline instead of the dense index.")
@pass_workspace
def retrieve(ws, query, k, sparse):
    """Rank tables against a query."""
    emit({"event": "seed", "seed": 0})
    engine = _load_engine(ws)
    ranked = engine.retrieve_table(query, k=k, sparse=sparse)
    for table_id, score in ranked:
        emit({"table_id": table_id, "score": score})


@cli.command("eval-retrieval")
@click.option("--cases", type=click.Path(exists=True), help="JSONL of {query, table_id}; defaults to <workspace>/test_cases.jsonl.")
@click.option("--retriever", type=click.Choice(["dense", "bm25"]), default="dense", show_default=True)
@pass_workspace
def eval_retrieval_cmd(ws, cases, retriever):
    """First-turn retrieval metrics (MRR@10, Top-1, Top-3)."""
    emit({"event": "seed", "seed": 0})
    corpus = load_corpus(ws.require("corpus.jsonl", "run ingest first"))
    case_path = Path(cases) if cases else ws.require("test_cases.jsonl", "supply --cases")
    eval_cases = synth.load_pairs(case_path)
    if not eval_cases:
        raise EvalError(f"{case_path}: no evaluation cases")
    model_path = ws.require("model.bin", "run train-retriever first")
    de = load_model(model_path)
    idx = load_index(ws.require("index.bin", "run build-index first"), model_fingerprint(model_path))
    bm25 = load_bm25(ws.require("bm25.bin", "run build-index first"))
    report = run_retrieval_eval(corpus, eval_cases, retriever, de=de, dense=idx, bm25=bm25)
    emit({"event": "report", **report.metrics, "cases": report.case_count})
    click.echo(report.to_table(), err=True)


@cli.command("eval-dialogue")
@click.option("--mode", type=click.Choice(["nok", "top1", "top3"]), default="top3", show_default=True)
@click.option("--tr", type=click.Choice(["gold", "dense", "bm25"]), default="gold", show_default=True, help="Table retrieval source.")
@click.option("--dialogues", type=click.Path(exists=True), help="Dialogue JSONL; defaults to <workspace>/dialogues.jsonl.")
@pass_workspace
def eval_dialogue_cmd(ws, mode, tr, dialogues):
    """Cell-ranking and ROUGE metrics over dialogues (mock provider)."""
    emit({"event": "seed", "seed": 0})
    engine = _load_engine(ws, need_ranker=True)
    dlg_path = Path(dialogues) if dialogues else ws.require("dialogues.jsonl", "supply --dialogues")
    records = load_dialogues(dlg_path)
    report = run_dialogue_eval(engine, records, Mode(mode), tr)
    emit({"event": "report", **report.metrics, "cases": report.case_count})
    click.echo(report.to_table(), err=True)


@cli.command()
@click.option("--mode", type=click.Choice(["nok", "top1", "top3"]), default="top3", show_default=True)
@click.option("--provider", type=click.Choice(["mock", "http"]), default="mock", show_default=True)
@pass_workspace
def chat(ws, mode, provider):
    """Terminal REPL; prints ranked knowledge beneath each answer."""
    emit({"event": "seed", "seed": 0})
    engine = _load_engine(ws, provider_kind=provider, need_ranker=True)
    mode_enum = Mode(mode)
    turns: list[tuple[str, str]] = []
    active_table: str | None = None
    click.echo("grounder chat (empty line to quit)", err=True)
    while True:
        try:
            query = click.prompt("you", prompt_suffix="> ", default="", show_default=False)
        except (EOFError, click.Abort):
            break
        if not query.strip():
            break
        history = DialogueHistory(turns=tuple(turns), current_query=query)
        result = answer_turn(engine, history, mode_enum, active_table)
        active_table = result.table_id
        click.echo(f"bot> {result.response}")
        for ref, score, text in result.ranked_knowledge:
            click.echo(f"     [{ref.row},{ref.col}] {score:+.4f} {text}", err=True)
        turns.append((query, result.response))


@cli.command()
@click.option("--bind", default=None, help="host:port; defaults to GROUNDER_BIND_ADDR or 127.0.0.1:8000.")
@click.option("--provider", type=click.Choice(["mock", "http"]), default="mock", show_default=True)
@pass_workspace
def serve(ws, bind, provider):
    """Run the HTTP service (sessions persist under GROUNDER_DATA_DIR)."""
    import uvicorn

    from .service import create_app

    emit({"event": "seed", "seed": 0})
    engine = _load_engine(ws, provider_kind=provider, need_ranker=True)
    data_dir = os.environ.get("GROUNDER_DATA_DIR", str(ws.path("data")))
    ui_dir = ws.path("ui") if ws.path("ui").is_dir() else Path(__file__).resolve().parents[2] / "frontend" / "dist"
    app = create_app(engine, data_dir, ui_dir=ui_dir)
    bind = bind or os.environ.get("GROUNDER_BIND_ADDR", "127.0.0.1:8000")
    host, _, port = bind.partition(":")
    uvicorn.run(app, host=host, port=int(port or 8000))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:  # --help and friends
        return 0 if exc.exit_code == 0 else 1
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        return 1
    except click.Abort:
        return 1
    except ProviderError as exc:
        click.echo(f"provider error: {exc}", err=True)
        return 3
    except DATA_ERRORS as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
