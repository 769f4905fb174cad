"""Command-line entry point: ``ari <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, Optional, Sequence

from .embedding import HashingEmbedder, RemoteEmbedder
from .evaluation import QUESTION_FORMATS, evaluate_run, load_questions, run_question, stratified_sample, write_traces
from .llm import LLMGateway, RemoteLLM, ScriptedLLM
from .memory import (
    DEFAULT_CLUSTERS,
    DEFAULT_HISTORY_SIZE,
    HistoryStore,
    MethodologyBank,
    cluster_history,
    global_cluster,
    induce_methodology,
    write_cluster_report,
)
from .reasoner import ReasonerConfig, answer_question, trace_to_episode
from .tkg import FACT_FORMATS, load_facts

logger = logging.getLogger("ari")

ABLATIONS = {
    "none": {},
    "no-methodology": {"use_methodology": False},
    "no-clustering": {"use_clustering": False},
    "no-filter": {"use_filter": False},
}


@dataclass
class RunConfig:
    kg: Optional[str] = None
    kg_format: str = "tsv"
    aliases: Optional[str] = None
    questions: Optional[str] = None
    question_format: str = "multitq"
    split: Optional[str] = None
    history: Optional[str] = None
    methodology: Optional[str] = None
    backend: str = "scripted"
    script: Optional[str] = None
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-3.5-turbo-0613"
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    retries: int = 3
    max_in_flight: int = 4
    embedding: str = "hash"
    embedding_url: Optional[str] = None
    embedding_model: str = "text-embedding-3-small"
    seed: int = 0
    max_steps: int = 5
    top_k: int = 20
    clusters: int = DEFAULT_CLUSTERS
    history_size: int = DEFAULT_HISTORY_SIZE
    sample_size: int = 200
    ablate: str = "none"
    parse_retries: int = 2
    workers: int = 1
    out: str = "runs/latest"

    def reasoner_config(self) -> ReasonerConfig:
        return ReasonerConfig(
            max_steps=self.max_steps, top_k=self.top_k, parse_retries=self.parse_retries, **ABLATIONS[self.ablate]
        )

    def fingerprint(self) -> dict:
        # the output location does not affect results
        return {k: v for k, v in dataclasses.asdict(self).items() if k != "out"}


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, value: str):
    kind = _FIELD_TYPES[name]
    if value in ("", "none", "None") and "Optional" in str(kind):
        return None
    if kind in ("int", int):
        return int(value)
    if kind in ("float", float):
        return float(value)
    return value


def read_config_file(path: str) -> Dict[str, object]:
    """Flat ``key = value`` file; ``#`` starts a comment, keys may use - or _."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        out[key] = _coerce(key, value)
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", help="flat key=value config file; flags override it")
    g.add_argument("--kg", help="fact file (head TAB relation TAB tail TAB start [TAB end])")
    g.add_argument("--kg-format", choices=FACT_FORMATS)
    g.add_argument("--aliases", help="alias file (canonical TAB alias)")
    g.add_argument("--questions", help="question file (JSON lines)")
    g.add_argument("--question-format", choices=QUESTION_FORMATS)
    g.add_argument("--split", help="only use questions from this split")
    g.add_argument("--history", help="episode history file (JSON lines)")
    g.add_argument("--methodology", help="methodology file (JSON lines, one cluster per line)")
    g.add_argument("--backend", choices=("scripted", "remote"))
    g.add_argument("--script", help="script file for the scripted backend")
    g.add_argument("--base-url")
    g.add_argument("--model")
    g.add_argument("--api-key-env", help="environment variable holding the API key")
    g.add_argument("--timeout", type=float)
    g.add_argument("--retries", type=int)
    g.add_argument("--max-in-flight", type=int)
    g.add_argument("--embedding", choices=("hash", "remote"))
    g.add_argument("--embedding-url")
    g.add_argument("--embedding-model")
    g.add_argument("--seed", type=int)
    g.add_argument("--max-steps", type=int)
    g.add_argument("--top-k", type=int)
    g.add_argument("--clusters", type=int)
    g.add_argument("--history-size", type=int)
    g.add_argument("--sample-size", type=int)
    g.add_argument("--ablate", choices=tuple(ABLATIONS))
    g.add_argument("--parse-retries", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ari", description="Temporal KG question answering with induced methodologies")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("ingest", "load and index a fact file, print statistics"),
        ("build-history", "answer training questions and record labeled episodes"),
        ("induce", "cluster the history and induce one methodology per cluster"),
        ("ask", "answer a single question and print its trace"),
        ("eval", "stratified evaluation with Hits@1/Hits@10 report"),
        ("cluster-report", "CSV export of episode cluster assignments"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "ask":
            p.add_argument("--question", required=True)
            p.add_argument("--anchor", action="append", default=[], help="subject entity; repeatable")
        if name == "induce":
            p.add_argument("--no-global", action="store_true", help="skip the single global methodology")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values: Dict[str, object] = {}
    if args.config:
        values.update(read_config_file(args.config))
    for name in _FIELD_TYPES:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    cfg = RunConfig(**values)
    if cfg.ablate not in ABLATIONS:
        raise ValueError(f"unknown ablation {cfg.ablate!r}")
    return cfg


def _require(cfg: RunConfig, *names: str) -> None:
    for name in names:
        value = getattr(cfg, name)
        if value is None:
            raise ValueError(f"--{name.replace('_', '-')} is required for this command")
        if not Path(value).exists():
            raise FileNotFoundError(f"--{name.replace('_', '-')}: no such file {value}")


def _file_digest(path: Optional[str]) -> Optional[str]:
    if path is None or not Path(path).exists():
        return None
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(cfg: RunConfig, command: str, out: Path) -> None:
    fp = cfg.fingerprint()
    blob = json.dumps(fp, sort_keys=True)
    manifest = {
        "command": command,
        "config": fp,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
        "seed": cfg.seed,
        "inputs": {
            k: {"path": getattr(cfg, k), "sha256": _file_digest(getattr(cfg, k))}
            for k in ("kg", "aliases", "questions", "history", "methodology", "script")
            if getattr(cfg, k)
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _embedder(cfg: RunConfig):
    if cfg.embedding == "remote":
        if not cfg.embedding_url:
            raise ValueError("--embedding-url is required for the remote embedding backend")
        return RemoteEmbedder(cfg.embedding_url, cfg.embedding_model, timeout=cfg.timeout, retries=cfg.retries,
                              max_in_flight=cfg.max_in_flight)
    return HashingEmbedder()


def _gateway(cfg: RunConfig, out: Path) -> LLMGateway:
    if cfg.backend == "scripted":
        _require(cfg, "script")
        backend = ScriptedLLM.from_file(cfg.script)
    else:
        backend = RemoteLLM(cfg.base_url, cfg.model, cfg.api_key_env, cfg.timeout, cfg.retries,
                            max_in_flight=cfg.max_in_flight)
    log = out / "llm_log.jsonl"
    if log.exists():
        log.unlink()
    return LLMGateway(backend, log)


def _memory(cfg: RunConfig, embedder) -> Optional[MethodologyBank]:
    if cfg.methodology is None:
        if cfg.ablate != "no-methodology":
            logger.warning("no --methodology file given; the methodology slot stays empty")
        return None
    _require(cfg, "methodology")
    return MethodologyBank.load(cfg.methodology, embedder)


def _questions(cfg: RunConfig):
    recs = load_questions(cfg.questions, cfg.question_format)
    if cfg.split:
        recs = [r for r in recs if r.split == cfg.split]
    return recs


def cmd_ingest(cfg: RunConfig, args, out: Path) -> int:
    _require(cfg, "kg")
    kg = load_facts(cfg.kg, cfg.kg_format, cfg.aliases)
    stats = kg.stats()
    print(json.dumps(stats, sort_keys=True))
    (out / "kg_stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def cmd_build_history(cfg: RunConfig, args, out: Path) -> int:
    _require(cfg, "kg", "questions")
    if cfg.history is None:
        raise ValueError("--history is required for build-history")
    kg = load_facts(cfg.kg, cfg.kg_format, cfg.aliases)
    recs = _questions(cfg)
    sample = stratified_sample(recs, min(cfg.history_size, len(recs)), cfg.seed)
    embedder = _embedder(cfg)
    llm = _gateway(cfg, out)
    rcfg = dataclasses.replace(cfg.reasoner_config(), use_methodology=False)
    store = HistoryStore(cfg.history)
    traces = []
    for rec in sample:
        tr = run_question(rec, rcfg, kg, None, llm, embedder)
        traces.append(tr)
        store.record(trace_to_episode(tr, rec.gold_answers, rec.answer_type, rec.granularity, embedder))
    write_traces(out / "history_traces.jsonl", sample, traces)
    print(f"recorded {len(sample)} episodes; history now holds {len(store)}")
    return 0


def cmd_induce(cfg: RunConfig, args, out: Path) -> int:
    _require(cfg, "history")
    if cfg.methodology is None:
        cfg.methodology = str(out / "methodology.jsonl")
    store = HistoryStore(cfg.history)
    embedder = _embedder(cfg)
    llm = _gateway(cfg, out)
    clusters = cluster_history(store, cfg.clusters, cfg.seed)
    for c in clusters:
        induce_methodology(c, store, llm)
    global_text = None
    if not args.no_global:
        global_text = induce_methodology(global_cluster(store), store, llm)
    bank = MethodologyBank(clusters, global_text, embedder)
    bank.save(cfg.methodology)
    write_cluster_report(out / "cluster_report.csv", clusters, store)
    print(f"induced {len(clusters)} methodologies -> {cfg.methodology}")
    return 0


def cmd_ask(cfg: RunConfig, args, out: Path) -> int:
    _require(cfg, "kg")
    if not args.anchor:
        raise ValueError("at least one --anchor is required")
    kg = load_facts(cfg.kg, cfg.kg_format, cfg.aliases)
    embedder = _embedder(cfg)
    memory = _memory(cfg, embedder)
    llm = _gateway(cfg, out)
    tr = answer_question(args.question, args.anchor, kg, memory, llm, cfg.reasoner_config(), embedder=embedder)
    print(f"Question: {tr.question}")
    if tr.methodology:
        print(f"Methodology (cluster {tr.cluster_id}):\n{tr.methodology}")
    for s in tr.steps:
        print(f"Action {s.index}: {s.action or '(none)'}")
        print(f"Response {s.index}: {s.result}")
    print(f"Outcome: {tr.outcome}")
    print(f"Final answer: {tr.answer if tr.answer is not None else '(none)'}")
    with open(out / "trace.json", "w", encoding="utf-8") as fh:
        json.dump(tr.to_record(), fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
    return 0


def cmd_eval(cfg: RunConfig, args, out: Path) -> int:
    _require(cfg, "kg", "questions")
    kg = load_facts(cfg.kg, cfg.kg_format, cfg.aliases)
    recs = _questions(cfg)
    sample = stratified_sample(recs, min(cfg.sample_size, len(recs)), cfg.seed)
    embedder = _embedder(cfg)
    memory = _memory(cfg, embedder)
    llm = _gateway(cfg, out)
    report = evaluate_run(
        sample, cfg.reasoner_config(), kg, memory, llm, embedder, workers=cfg.workers, trace_path=out / "traces.jsonl"
    )
    (out / "metrics.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "metrics.txt").write_text(report.to_table(), encoding="utf-8")
    (out / "metrics_by_category.csv").write_text(report.to_csv(), encoding="utf-8")
    print(report.to_table(), end="")
    return 0


def cmd_cluster_report(cfg: RunConfig, args, out: Path) -> int:
    _require(cfg, "history")
    store = HistoryStore(cfg.history)
    if cfg.methodology is not None:
        _require(cfg, "methodology")
        clusters = MethodologyBank.load(cfg.methodology).clusters
    else:
        clusters = cluster_history(store, cfg.clusters, cfg.seed)
    n = write_cluster_report(out / "cluster_report.csv", clusters, store)
    print(f"wrote {n} rows to {out / 'cluster_report.csv'}")
    return 0


INPUTS = {
    "ingest": ("kg", "aliases"),
    "build-history": ("kg", "aliases", "questions", "script"),
    "induce": ("history", "script"),
    "ask": ("kg", "aliases", "methodology", "script"),
    "eval": ("kg", "aliases", "questions", "methodology", "script"),
    "cluster-report": ("history", "methodology"),
}


def validate_paths(cfg: RunConfig, command: str) -> None:
    """Fail fast on missing input files, before any loading starts."""
    for name in INPUTS[command]:
        if name == "script" and cfg.backend != "scripted":
            continue
        value = getattr(cfg, name)
        if value is not None and not Path(value).exists():
            raise FileNotFoundError(f"--{name.replace('_', '-')}: no such file {value}")


COMMANDS = {
    "ingest": cmd_ingest,
    "build-history": cmd_build_history,
    "induce": cmd_induce,
    "ask": cmd_ask,
    "eval": cmd_eval,
    "cluster-report": cmd_cluster_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except (ValueError, OSError) as exc:
        parser.error(str(exc))
    try:
        validate_paths(cfg, args.command)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(cfg, args.command, out)
        return COMMANDS[args.command](cfg, args, out)
    except Exception as exc:  # surfaced as a diagnostic, not a traceback
        logger.debug("command failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
