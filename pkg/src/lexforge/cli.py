"""Command-line pipeline driver.

One subcommand per stage: fixtures -> ingest -> extract -> synthesize ->
augment (or pairs) -> train -> index -> search -> eval -> report. Every
stage reads and writes only the documented line-delimited files, writes
outputs atomically, and is re-runnable. Exit codes: 0 success, 1 usage,
2 data error, 3 remote-client failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import augment as augment_mod
from . import evaluation, fileio, retrieval, testkit, training
from . import querygen as querygen_mod
from .config import PipelineConfig, load_config
from .corpus import (
    CaseDocument,
    Exclusion,
    elements_from_record,
    elements_to_record,
    case_to_record,
    filter_corpus,
    parse_case,
)
from .errors import GenerationFailed, LexforgeError, UsageError
from .seeds import derive_seed

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_REMOTE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A003 - argparse API
        raise UsageError(message)


# --------------------------------------------------------------------------
# File helpers
# --------------------------------------------------------------------------

def _load_corpus(path: Path) -> dict[str, CaseDocument]:
    docs = {}
    for record in fileio.read_jsonl(path):
        doc = parse_case(record)
        docs[doc.case_id] = doc
    return docs


def _load_elements(path: Path):
    elements = {}
    for record in fileio.read_jsonl(path):
        case_id, el = elements_from_record(record)
        elements[case_id] = el
    return elements


def _load_queries(path: Path) -> list[querygen_mod.QueryRecord]:
    return [querygen_mod.QueryRecord.from_record(r) for r in fileio.read_jsonl(path)]


def _load_qrels(path: Path) -> dict[str, dict[str, int]]:
    qrels: dict[str, dict[str, int]] = {}
    for record in fileio.read_jsonl(path):
        qrels.setdefault(record["query_id"], {})[record["case_id"]] = int(record["label"])
    return qrels


def _load_pools(path: Path) -> dict[str, list[str]]:
    return {r["query_id"]: list(r["candidate_ids"]) for r in fileio.read_jsonl(path)}


def _load_run(path: Path) -> dict[str, list[tuple[str, float]]]:
    rows: dict[str, list[tuple[int, str, float]]] = {}
    for record in fileio.read_jsonl(path):
        rows.setdefault(record["query_id"], []).append(
            (int(record["rank"]), record["case_id"], float(record["score"])))
    return {qid: [(cid, score) for _, cid, score in sorted(entries)]
            for qid, entries in rows.items()}


def _write_run(path: Path, run: dict[str, list[tuple[str, float]]], scorer: str) -> None:
    records = []
    for query_id in sorted(run):
        for rank, (case_id, score) in enumerate(run[query_id], start=1):
            records.append({"query_id": query_id, "case_id": case_id,
                            "rank": rank, "score": score, "scorer": scorer})
    fileio.write_jsonl(path, records)


def _corpus_texts(docs: dict[str, CaseDocument]) -> dict[str, str]:
    return {cid: testkit.case_text(doc) for cid, doc in docs.items()}


# --------------------------------------------------------------------------
# Stage implementations
# --------------------------------------------------------------------------

def _cmd_fixtures(args, cfg: PipelineConfig) -> int:
    out = Path(args.out)
    spec = testkit.SyntheticSpec(
        n_cases=args.n_cases, charge_count=args.charges,
        n_rulings=args.n_rulings, n_short_facts=args.n_short_facts,
        min_fact_chars=cfg.filter.min_fact_chars, seed=args.seed)
    build = testkit.generate_corpus(spec)
    fileio.write_jsonl(out / "corpus.jsonl", (case_to_record(d) for d in build.cases))
    fileio.write_jsonl(out / "truth.jsonl", (
        elements_to_record(cid, t.elements)
        for cid, t in sorted(build.truth.items()) if t.elements is not None))

    qrels_build = testkit.generate_qrels(build, seed=args.seed, n_queries=args.n_queries)
    fileio.write_jsonl(out / "pools.jsonl", (
        {"query_id": qid, "candidate_ids": qrels_build.pools[qid]}
        for qid in sorted(qrels_build.pools)))
    fileio.write_jsonl(out / "qrels.jsonl", (
        {"query_id": qid, "case_id": cid, "label": label}
        for qid in sorted(qrels_build.labels)
        for cid, label in sorted(qrels_build.labels[qid].items())))

    docs = {d.case_id: d for d in build.cases}
    client = querygen_mod.OfflineTemplateClient()
    eval_queries = querygen_mod.generate_queries(
        [docs[qrels_build.sources[qid]] for qid in sorted(qrels_build.sources)],
        client, global_seed=derive_seed(args.seed, "eval-queries"),
        max_query_chars=cfg.max_query_chars)
    fileio.write_jsonl(out / "eval_queries.jsonl", (q.to_record() for q in eval_queries))
    print(f"fixtures: {len(build.cases)} cases, {len(eval_queries)} eval queries -> {out}")
    return EXIT_OK


def _cmd_ingest(args, cfg: PipelineConfig) -> int:
    docs = []
    for record in fileio.read_jsonl(Path(args.input)):
        docs.append(parse_case(record))
    fileio.write_jsonl(Path(args.output), (case_to_record(d) for d in docs))
    print(f"ingest: {len(docs)} records -> {args.output}")
    return EXIT_OK


def _cmd_extract(args, cfg: PipelineConfig) -> int:
    docs = _load_corpus(Path(args.corpus))
    exclusions: list[Exclusion] = []
    admitted = []
    for doc, elements in filter_corpus((docs[c] for c in sorted(docs)),
                                       cfg.filter, on_exclude=exclusions.append):
        if elements is not None:
            admitted.append(elements_to_record(doc.case_id, elements))
    fileio.write_jsonl(Path(args.elements), admitted)
    if args.exclusions:
        fileio.write_jsonl(Path(args.exclusions), (e.to_record() for e in exclusions))
    print(f"extract: {len(admitted)} admitted, {len(exclusions)} excluded")
    return EXIT_OK


def _cmd_synthesize(args, cfg: PipelineConfig) -> int:
    docs = _load_corpus(Path(args.corpus))
    elements = _load_elements(Path(args.elements))
    targets = [docs[cid] for cid in sorted(elements) if cid in docs]
    if args.limit:
        targets = targets[:args.limit]
    if args.client == "remote":
        settings = cfg.client
        if not settings.endpoint:
            raise UsageError("remote client needs an endpoint "
                             "(config [client] endpoint or LEXFORGE_ENDPOINT)")
        client = querygen_mod.RemoteGenerationClient(
            endpoint=settings.endpoint, model=settings.model,
            api_key=settings.api_key, timeout=settings.timeout,
            max_retries=settings.retries, backoff=settings.backoff)
    else:
        client = querygen_mod.OfflineTemplateClient()
    in_flight = args.max_in_flight or cfg.client.max_in_flight
    queries = querygen_mod.generate_queries(
        targets, client, global_seed=args.seed,
        max_in_flight=in_flight,
        max_query_chars=cfg.max_query_chars)
    fileio.write_jsonl(Path(args.output), (q.to_record() for q in queries))
    if queries:
        avg_q = sum(len(q.text) for q in queries) / len(queries)
        avg_f = sum(len(d.fact) for d in targets) / len(targets)
        print(f"synthesize: {len(queries)} queries "
              f"(avg query {avg_q:.0f} chars vs avg fact {avg_f:.0f} chars)")
    return EXIT_OK


def _cmd_augment(args, cfg: PipelineConfig) -> int:
    queries = _load_queries(Path(args.queries))
    elements = _load_elements(Path(args.elements))
    index = augment_mod.build_element_index(elements)
    aug_cfg = augment_mod.AugmentConfig(
        proportion_augmented=args.proportion if args.proportion is not None
        else cfg.augment.proportion_augmented,
        weight_ancillary=cfg.augment.weight_ancillary,
        weight_term=cfg.augment.weight_term,
        seed=args.seed, match_mode=cfg.augment.match_mode)
    result = augment_mod.mix_pairs(queries, elements, index, aug_cfg)
    fileio.write_jsonl(Path(args.output), (p.to_record() for p in result.pairs))
    print(f"augment: {len(result.pairs)} pairs, {result.augmented_count} augmented, "
          f"{len(result.fallbacks)} fallbacks")
    return EXIT_OK


def _cmd_pairs(args, cfg: PipelineConfig) -> int:
    pools = _load_pools(Path(args.pools))
    qrels = _load_qrels(Path(args.qrels))
    build = training.triplets_from_qrels(pools, qrels, seed=args.seed)
    fileio.write_jsonl(Path(args.output), (t.to_record() for t in build.triplets))
    if build.skipped:
        print(f"pairs: skipped {len(build.skipped)} queries without positives",
              file=sys.stderr)
    print(f"pairs: {len(build.triplets)} triplets")
    return EXIT_OK


def _cmd_train(args, cfg: PipelineConfig) -> int:
    docs = _load_corpus(Path(args.corpus))
    queries = {q.query_id: q for q in _load_queries(Path(args.queries))}
    texts = _corpus_texts(docs)
    examples = []
    for record in fileio.read_jsonl(Path(args.pairs)):
        pair = augment_mod.TrainingPair.from_record(record)
        query = queries[pair.query_id]
        examples.append(training.PairExample(
            query_text=query.text,
            positive_text=texts[pair.positive_case_id],
            positive_charges=pair.positive_charges))
    embedder = training.ToyEmbedder(
        dim=args.dim, hash_buckets=args.hash_buckets, seed=args.seed)
    schedule = training.TrainSchedule(
        epochs=args.epochs, batch_size=args.batch_size,
        learning_rate=args.learning_rate, seed=args.seed)
    loss_cfg = training.LossConfig(
        temperature=cfg.loss.temperature,
        masking_enabled=not args.no_masking and cfg.loss.masking_enabled)
    result = training.train_toy(examples, embedder, schedule, loss_cfg)
    embedder.save(args.output)
    if args.curve:
        fileio.atomic_write_text(
            Path(args.curve),
            "".join(f"{step}\t{loss:.10f}\n" for step, loss in result.loss_curve))
    first = result.loss_curve[0][1]
    last = result.loss_curve[-1][1]
    print(f"train: {len(examples)} pairs, {len(result.loss_curve)} steps, "
          f"loss {first:.4f} -> {last:.4f}")
    return EXIT_OK


def _cmd_index(args, cfg: PipelineConfig) -> int:
    docs = _load_corpus(Path(args.corpus))
    index = retrieval.Bm25Index.build(_corpus_texts(docs), args.tokenizer)
    index.save(Path(args.output))
    print(f"index: {index.n_docs} docs, {len(index.doc_freq)} terms")
    return EXIT_OK


def _cmd_search(args, cfg: PipelineConfig) -> int:
    docs = _load_corpus(Path(args.corpus))
    texts = _corpus_texts(docs)
    queries = _load_queries(Path(args.queries))
    pools = _load_pools(Path(args.pools)) if args.pools else None
    index = retrieval.Bm25Index.load(Path(args.index)) if args.index else None
    embedder = training.load_checkpoint(args.checkpoint) if args.checkpoint else None
    if args.scorer == "dense" and embedder is None:
        raise UsageError("dense scoring needs --checkpoint")

    run: dict[str, list[tuple[str, float]]] = {}
    for query in queries:
        if pools is not None:
            if query.query_id not in pools:
                continue
            pool = {cid: texts[cid] for cid in pools[query.query_id] if cid in texts}
        else:
            pool = texts
        run[query.query_id] = retrieval.search(
            query.text, pool, scorer=args.scorer, k=args.k,
            bm25_params=cfg.bm25, index=index, embedder=embedder,
            seg_cfg=cfg.segment)
    _write_run(Path(args.output), run, args.scorer)
    print(f"search: {len(run)} queries, top-{args.k} by {args.scorer}")
    return EXIT_OK


def _cmd_eval(args, cfg: PipelineConfig) -> int:
    run = _load_run(Path(args.run))
    qrels = _load_qrels(Path(args.qrels))
    report = evaluation.evaluate_run(run, qrels, gain=args.gain)
    payload = report.to_dict()
    payload["label"] = args.label or Path(args.run).stem
    fileio.atomic_write_text(
        Path(args.output),
        json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n")
    print(f"eval: {len(report.per_query)} queries "
          f"({len(report.missing)} missing from run)")
    for name in evaluation.METRIC_ORDER:
        if name in report.macro:
            print(f"  {name:>8}: {report.macro[name]:.4f}")
    for warning in report.warnings:
        print(f"  warning: {warning}", file=sys.stderr)
    return EXIT_OK


def _cmd_report(args, cfg: PipelineConfig) -> int:
    reports = []
    for path in args.metrics:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        reports.append((payload.get("label", Path(path).stem), payload["macro"]))
    names = [n for n in evaluation.METRIC_ORDER if all(n in m for _, m in reports)]

    header = ["run"] + names
    widths = [max(len(header[0]), *(len("Δ " + label) for label, _ in reports))]
    widths += [max(8, len(n)) for n in names]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    baseline = reports[0][1]
    for i, (label, macro) in enumerate(reports):
        row = [label.ljust(widths[0])]
        for j, name in enumerate(names):
            row.append(f"{macro[name]:.4f}".ljust(widths[j + 1]))
        lines.append("  ".join(row))
        if i > 0:
            deltas = [("Δ " + label).ljust(widths[0])]
            for j, name in enumerate(names):
                deltas.append(f"{macro[name] - baseline[name]:+.4f}".ljust(widths[j + 1]))
            lines.append("  ".join(deltas))
    table = "\n".join(lines)
    print(table)
    if args.output:
        fileio.atomic_write_text(Path(args.output), table + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="lexforge", description=__doc__)
    parser.add_argument("--config", help="path to the pipeline config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixtures", help="generate a synthetic corpus with qrels")
    p.add_argument("--out", required=True)
    p.add_argument("--n-cases", type=int, default=1000)
    p.add_argument("--n-queries", type=int, default=50)
    p.add_argument("--charges", type=int, default=10)
    p.add_argument("--n-rulings", type=int, default=0)
    p.add_argument("--n-short-facts", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_fixtures)

    p = sub.add_parser("ingest", help="parse and normalize raw case records")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("extract", help="filter the corpus and extract elements")
    p.add_argument("--corpus", required=True)
    p.add_argument("--elements", required=True)
    p.add_argument("--exclusions")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("synthesize", help="generate anonymized short queries")
    p.add_argument("--corpus", required=True)
    p.add_argument("--elements", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--client", choices=["offline", "remote"], default="offline")
    p.add_argument("--limit", type=int, default=0)
    p.add_argument("--max-in-flight", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("augment", help="mix original and augmented positives")
    p.add_argument("--queries", required=True)
    p.add_argument("--elements", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--proportion", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("pairs", help="build triplets from annotated benchmarks")
    p.add_argument("--pools", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_pairs)

    p = sub.add_parser("train", help="train the toy embedder on pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--curve")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=1e-2)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--hash-buckets", type=int, default=1 << 15)
    p.add_argument("--no-masking", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("index", help="build and save a BM25 index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--tokenizer", choices=sorted(retrieval.TOKENIZERS), default="char_bigram")
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("search", help="rank candidate pools for each query")
    p.add_argument("--queries", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--pools")
    p.add_argument("--scorer", choices=["bm25", "dense"], default="bm25")
    p.add_argument("--index")
    p.add_argument("--checkpoint")
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("eval", help="score a run against graded judgments")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--gain", choices=["linear", "exponential"], default="linear")
    p.add_argument("--label")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("report", help="compare metric reports across runs")
    p.add_argument("metrics", nargs="+")
    p.add_argument("--output")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.config) if args.config else PipelineConfig()
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GenerationFailed as exc:
        print(f"remote client failure: {exc}", file=sys.stderr)
        return EXIT_REMOTE
    except (LexforgeError, FileNotFoundError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
