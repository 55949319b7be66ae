"""Single entry point: `ra-ner <subcommand>`.

Subcommands: stats, index (build/search), retrieve, augment, train, tag,
iterate, eval, prompt (build/parse), conformance, pipeline. Exit codes:
0 ok, 1 runtime failure, 2 usage error. RA_NER_LOG sets log verbosity.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, augment, conll, evaluate, fixtures, iterate, kb, llm_io, retrieval
from .labels import Example, Label
from .retrieval import ContextEntry, RetrievalConfig, RetrievedContext

log = logging.getLogger("ra_ner")


def _setup_logging() -> None:
    level = os.environ.get("RA_NER_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_tagger(descriptor: str, seed: int):
    from . import tagger as tg

    kind, _, arg = descriptor.partition(":")
    if kind == "linear":
        return tg.LinearTagger(tg.load_model(arg))
    if kind == "gazetteer":
        with open(arg, encoding="utf-8") as fh:
            obj = json.load(fh)
        if "surfaces" in obj or "title_types" in obj:
            return tg.GazetteerTagger(obj.get("surfaces", {}), obj.get("title_types", {}))
        return tg.GazetteerTagger(obj)
    if kind == "remote":
        return tg.RemoteTagger(arg)
    raise ValueError(f"unknown tagger descriptor {descriptor!r} "
                     "(want linear:<model>, gazetteer:<table.json>, remote:<endpoint>)")


# ---------------------------------------------------------------------------
# Context file helpers (JSONL of {example_id, entries: [{title, text, origin}]})


def write_context_jsonl(path, contexts: dict[str, RetrievedContext]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex_id, ctx in contexts.items():
            fh.write(json.dumps({
                "example_id": ex_id,
                "entries": [
                    {"title": e.source_title, "text": e.rendered_text, "origin": e.origin}
                    for e in ctx.entries
                ],
            }, ensure_ascii=False) + "\n")


def read_context_jsonl(path) -> dict[str, RetrievedContext]:
    out: dict[str, RetrievedContext] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out[obj["example_id"]] = RetrievedContext(tuple(
                ContextEntry(e["title"], e["text"], e["origin"]) for e in obj["entries"]
            ))
    return out


def read_augmented(conll_path, sidecar_path) -> list[augment.AugmentedExample]:
    """Reconstruct augmented examples from a full-token CoNLL + sidecar."""
    examples = conll.read_conll_file(conll_path)
    meta = {}
    with open(sidecar_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                meta[obj["id"]] = obj["base_len"]
    out = []
    for ex in examples:
        base_len = meta[ex.id]
        base = Example(ex.id, ex.tokens[:base_len], ex.labels[:base_len])
        eos = ex.tokens[base_len]
        out.append(augment.AugmentedExample(base, ex.tokens[base_len + 1 :], eos))
    return out


# ---------------------------------------------------------------------------
# Subcommands


def cmd_stats(args) -> int:
    examples = conll.read_conll_file(args.conll)
    stats = conll.dataset_stats(examples)
    sys.stdout.write(conll.stats_table(stats))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(conll.stats_keyvalues(stats))
    return 0


def cmd_index_build(args) -> int:
    store = kb.read_kb_jsonl(args.kb)
    index = kb.build_index(store, k1=args.k1, b=args.b)
    kb.save_index(args.out, store, index)
    log.info("indexed %d documents -> %s", len(store), args.out)
    return 0


def cmd_index_search(args) -> int:
    store, index = kb.load_index(args.idx)
    for hit in kb.search(index, args.field, args.query, args.k):
        title = store[hit.doc_id].title
        print(f"{hit.score:.6f}\t{hit.doc_id}\t{hit.field_unit_id}\t{title}")
    return 0


def cmd_retrieve(args) -> int:
    store, index = kb.load_index(args.idx)
    examples = conll.read_conll_file(args.conll)
    cfg = RetrievalConfig(args.k_sentence, args.k_title_per_entity, args.max_entries)
    entities = None
    if args.entities:
        entities = iterate.seed_with_external_entities(examples, args.entities)
    contexts = {}
    for ex in examples:
        sent_ctx = retrieval.retrieve_by_sentence(ex, index, store, cfg)
        ent_ctx = retrieval.EMPTY_CONTEXT
        if entities is not None:
            ent_ctx = retrieval.retrieve_by_entities(entities[ex.id], index, store, cfg)
        contexts[ex.id] = retrieval.combine(sent_ctx, ent_ctx, cfg)
    write_context_jsonl(args.out, contexts)
    return 0


def cmd_augment(args) -> int:
    examples = conll.read_conll_file(args.conll)
    contexts = read_context_jsonl(args.ctx) if args.ctx else {}
    cfg = augment.AugmentConfig(args.eos, args.sep, args.budget)
    augs = [
        augment.augment_example(ex, contexts.get(ex.id, retrieval.EMPTY_CONTEXT), cfg)
        for ex in examples
    ]
    full = [Example(a.base.id, a.full_tokens, a.full_labels) for a in augs]
    conll.write_conll_file(args.out, full)
    with open(args.sidecar, "w", encoding="utf-8") as fh:
        for a in augs:
            fh.write(augment.sidecar_line(a) + "\n")
    if args.finetune_out:
        with open(args.finetune_out, "w", encoding="utf-8") as fh:
            for ex in examples:
                rec, serialized = augment.build_finetune_record(
                    ex, contexts.get(ex.id, retrieval.EMPTY_CONTEXT),
                    args.system, args.instruction, args.input_budget,
                )
                fh.write(augment.finetune_record_line(rec, serialized) + "\n")
    return 0


def cmd_train(args) -> int:
    from . import tagger as tg

    augs = read_augmented(args.aug_conll, args.sidecar)
    cfg = tg.TrainConfig(args.epochs, args.lr, args.dim, args.seed)
    model = tg.train_linear(augs, cfg)
    tg.save_model(args.out, model)
    return 0


def cmd_tag(args) -> int:
    if args.sidecar:
        augs = read_augmented(args.conll, args.sidecar)
    else:
        augs = [augment.bare(ex) for ex in conll.read_conll_file(args.conll)]
    tagger = _load_tagger(args.tagger, args.seed)
    full_predictions = tagger.tag(augs)
    out = []
    for aug, full in zip(augs, full_predictions):
        base_labels = augment.strip_augmentation(full, aug.base_len)
        out.append(Example(aug.base.id, aug.base.tokens, base_labels))
    conll.write_conll_file(args.out, out)
    return 0


def cmd_iterate(args) -> int:
    store, index = kb.load_index(args.idx)
    if args.kb:  # optional override: rebuild the store from raw KB-JSONL
        store = kb.read_kb_jsonl(args.kb)
    dataset = conll.read_conll_file(args.conll)
    tagger = _load_tagger(args.tagger, args.seed)
    retr_cfg = RetrievalConfig(args.k_sentence, args.k_title_per_entity, args.max_entries)
    aug_cfg = augment.AugmentConfig(token_budget=args.budget)
    seed_entities = None
    if args.seed_entities:
        seed_entities = iterate.seed_with_external_entities(dataset, args.seed_entities)
    gold = dataset if args.gold else None
    trace = iterate.run_until_saturation(
        dataset, index, store, tagger,
        retr_cfg=retr_cfg, aug_cfg=aug_cfg,
        max_iters=args.max_iters, epsilon=args.epsilon,
        gold=gold, seed_entities=seed_entities, workers=args.workers,
    )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    summary_lines = ["iteration\tchange_ratio\tmacro_f1"]
    for i, rec in enumerate(trace.iterations, start=1):
        preds = [Example(ex.id, ex.tokens, rec.predictions[ex.id]) for ex in dataset]
        conll.write_conll_file(outdir / f"iter{i}.pred.conll", preds)
        iterate.write_entities_jsonl(outdir / f"iter{i}.entities.jsonl", rec.entities)
        macro = f"{rec.eval_report.macro_f1:.4f}" if rec.eval_report else "-"
        summary_lines.append(f"{i}\t{rec.change_ratio:.4f}\t{macro}")
    (outdir / "summary.tsv").write_text("\n".join(summary_lines) + "\n", encoding="utf-8")
    sys.stdout.write("\n".join(summary_lines) + "\n")
    return 0


def cmd_eval(args) -> int:
    gold = conll.read_conll_file(args.gold)
    pred = conll.read_conll_file(args.pred)
    rep = evaluate.report(gold, pred)
    outdir = Path(args.out) if args.out else None
    sys.stdout.write(evaluate.report_table(rep))
    if outdir:
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "report.txt").write_text(evaluate.report_table(rep), encoding="utf-8")
        (outdir / "report.csv").write_text(evaluate.report_csv(rep), encoding="utf-8")
    if args.lengthwise:
        lw = evaluate.lengthwise(gold, pred, args.lengthwise)
        table = evaluate.lengthwise_table(lw)
        sys.stdout.write(table)
        if outdir:
            (outdir / "lengthwise.txt").write_text(table, encoding="utf-8")
    if args.confusion:
        cm = evaluate.confusion(gold, pred)
        table = evaluate.confusion_table(cm)
        sys.stdout.write(table)
        if outdir:
            (outdir / "confusion.txt").write_text(table, encoding="utf-8")
    return 0


def cmd_prompt_build(args) -> int:
    examples = conll.read_conll_file(args.conll)
    contexts = {}
    if args.idx:
        store, index = kb.load_index(args.idx)
        cfg = RetrievalConfig(k_sentence=args.k_sentence)
        for ex in examples:
            contexts[ex.id] = retrieval.retrieve_by_sentence(ex, index, store, cfg)
    shots: tuple[tuple[str, str], ...] = ()
    if args.shots:
        with open(args.shots, encoding="utf-8") as fh:
            shots = tuple(
                (obj["sentence"], obj["entities"])
                for obj in (json.loads(l) for l in fh if l.strip())
            )
    spec = llm_io.PromptSpec(
        system_prompt=args.system, instruction=args.instruction,
        shots=shots, window_budget=args.budget, ra_enabled=not args.no_ra,
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        for ex in examples:
            ctx = contexts.get(ex.id, retrieval.EMPTY_CONTEXT)
            prompt = llm_io.build_fewshot_prompt(" ".join(ex.tokens), ctx, spec)
            fh.write(json.dumps({"example_id": ex.id, "prompt": prompt}, ensure_ascii=False) + "\n")
    return 0


def cmd_prompt_parse(args) -> int:
    examples = {ex.id: ex for ex in conll.read_conll_file(args.conll)}
    generations = {}
    with open(args.generations, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                generations[obj["example_id"]] = obj.get("text", "")
    out = []
    for ex_id, ex in examples.items():
        parsed = llm_io.parse_generation(generations.get(ex_id, ""))
        labels = llm_io.entities_to_bio(ex.tokens, parsed)
        out.append(Example(ex_id, ex.tokens, labels))
    conll.write_conll_file(args.out, out)
    return 0


def cmd_conformance(args) -> int:
    from .wire import run_conformance

    report = run_conformance(
        args.endpoint, n_requests=args.requests, n_malformed=args.malformed,
        seed=args.seed, timeout=args.timeout,
    )
    print(f"ping: {'ok' if report.pings_ok else 'FAIL'}")
    print(f"requests: {report.responses_ok}/{report.requests_sent}")
    print(f"malformed handled: {report.malformed_handled}/{report.malformed_sent}")
    for failure in report.failures:
        print(f"FAIL: {failure}")
    return 0 if report.passed else 1


def cmd_fixture(args) -> int:
    if args.what == "corpus":
        conll.write_conll_file(args.out, fixtures.synthetic_corpus(args.n, args.seed))
    elif args.what == "kb":
        fixtures.write_kb_jsonl(args.out, fixtures.synthetic_kb(args.n, args.seed))
    else:
        raise ValueError(f"unknown fixture kind {args.what!r}")
    return 0


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def cmd_pipeline(args) -> int:
    with open(args.manifest, encoding="utf-8") as fh:
        manifest = json.load(fh)
    results = []
    for step in manifest.get("steps", []):
        name = step.get("name", "<unnamed>")
        for inp in step.get("inputs", []):
            if not os.path.exists(inp):
                print(f"step {name}: missing input {inp}", file=sys.stderr)
                return 1
        log.info("pipeline step %s: ra-ner %s", name, " ".join(step["argv"]))
        code = main(step["argv"])
        if code != 0:
            print(f"step {name}: failed with exit code {code}", file=sys.stderr)
            return 1
        results.append({
            "name": name,
            "argv": step["argv"],
            "outputs": {out: _sha256(out) for out in step.get("outputs", [])},
        })
    run_log = {"version": __version__, "steps": results}
    with open(str(args.manifest) + ".run.json", "w", encoding="utf-8") as fh:
        json.dump(run_log, fh, ensure_ascii=False, indent=2)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ra-ner",
                                     description="Retrieval-augmented NER pipeline toolkit")
    parser.add_argument("--version", action="version", version=f"ra-ner {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset statistics for a CoNLL file")
    p.add_argument("--conll", required=True)
    p.add_argument("--out", help="write machine-readable key/value stats here")
    p.set_defaults(func=cmd_stats)

    p_index = sub.add_parser("index", help="build or query the KB index")
    index_sub = p_index.add_subparsers(dest="index_command", required=True)
    p = index_sub.add_parser("build")
    p.add_argument("--kb", required=True, help="KB-JSONL input")
    p.add_argument("--out", required=True)
    p.add_argument("--k1", type=float, default=1.2)
    p.add_argument("--b", type=float, default=0.75)
    p.set_defaults(func=cmd_index_build)
    p = index_sub.add_parser("search")
    p.add_argument("--idx", required=True)
    p.add_argument("--field", choices=["sentence", "title"], default="sentence")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--query", required=True)
    p.set_defaults(func=cmd_index_search)

    p = sub.add_parser("retrieve", help="render retrieval contexts for a dataset")
    p.add_argument("--idx", required=True)
    p.add_argument("--conll", required=True)
    p.add_argument("--entities", help="entities JSONL enabling title retrieval")
    p.add_argument("--out", required=True)
    p.add_argument("--k-sentence", type=int, default=10)
    p.add_argument("--k-title-per-entity", type=int, default=1)
    p.add_argument("--max-entries", type=int, default=20)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("augment", help="materialize augmented datasets")
    p.add_argument("--conll", required=True)
    p.add_argument("--ctx", help="context JSONL from `ra-ner retrieve`")
    p.add_argument("--out", required=True, help="augmented CoNLL output")
    p.add_argument("--sidecar", required=True, help="JSONL with base lengths")
    p.add_argument("--budget", type=int, default=256)
    p.add_argument("--eos", default="<EOS>")
    p.add_argument("--sep", default="[SEP]")
    p.add_argument("--finetune-out", help="also write generative fine-tune records")
    p.add_argument("--system", default=llm_io.DEFAULT_SYSTEM_PROMPT)
    p.add_argument("--instruction", default=llm_io.DEFAULT_INSTRUCTION)
    p.add_argument("--input-budget", type=int, default=800)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="train the built-in linear tagger")
    p.add_argument("--aug-conll", required=True)
    p.add_argument("--sidecar", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--dim", type=int, default=1 << 20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tag", help="tag a dataset with any tagger")
    p.add_argument("--conll", required=True)
    p.add_argument("--sidecar", help="treat --conll as augmented with this sidecar")
    p.add_argument("--tagger", required=True,
                   help="linear:<model> | gazetteer:<table.json> | remote:<endpoint>")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("iterate", help="iterative entity retrieval loop")
    p.add_argument("--idx", required=True)
    p.add_argument("--kb", help="optional KB-JSONL overriding the store in --idx")
    p.add_argument("--conll", required=True)
    p.add_argument("--tagger", required=True)
    p.add_argument("--max-iters", type=int, default=4)
    p.add_argument("--epsilon", type=float, default=0.001)
    p.add_argument("--out", required=True)
    p.add_argument("--gold", action="store_true",
                   help="treat --conll labels as gold and report per-iteration F1")
    p.add_argument("--seed-entities", help="entities JSONL seeding iteration 1")
    p.add_argument("--k-sentence", type=int, default=10)
    p.add_argument("--k-title-per-entity", type=int, default=1)
    p.add_argument("--max-entries", type=int, default=20)
    p.add_argument("--budget", type=int, default=256)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_iterate)

    p = sub.add_parser("eval", help="strict span-level evaluation")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--lengthwise", type=int, nargs="?", const=15, default=0)
    p.add_argument("--confusion", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p_prompt = sub.add_parser("prompt", help="LLM prompt building and output parsing")
    prompt_sub = p_prompt.add_subparsers(dest="prompt_command", required=True)
    p = prompt_sub.add_parser("build")
    p.add_argument("--conll", required=True)
    p.add_argument("--idx", help="KB index for RA context")
    p.add_argument("--budget", type=int, default=7680)
    p.add_argument("--shots", help="JSONL of {sentence, entities} demonstrations")
    p.add_argument("--out", required=True)
    p.add_argument("--system", default=llm_io.DEFAULT_SYSTEM_PROMPT)
    p.add_argument("--instruction", default=llm_io.DEFAULT_INSTRUCTION)
    p.add_argument("--no-ra", action="store_true")
    p.add_argument("--k-sentence", type=int, default=10)
    p.set_defaults(func=cmd_prompt_build)
    p = prompt_sub.add_parser("parse")
    p.add_argument("--generations", required=True, help="JSONL of {example_id, text}")
    p.add_argument("--conll", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prompt_parse)

    p = sub.add_parser("conformance", help="wire-protocol conformance check for adapters")
    p.add_argument("--endpoint", required=True, help="cmd:<argv> or tcp:host:port")
    p.add_argument("--requests", type=int, default=200)
    p.add_argument("--malformed", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout", type=float, default=30.0)
    p.set_defaults(func=cmd_conformance)

    p = sub.add_parser("fixture", help="emit deterministic synthetic fixtures")
    p.add_argument("what", choices=["corpus", "kb"])
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("pipeline", help="run a manifest of ra-ner steps")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # uniform runtime-failure exit code
        print(f"ra-ner: error: {exc}", file=sys.stderr)
        if os.environ.get("RA_NER_LOG", "").upper() == "DEBUG":
            raise
        return 1


if __name__ == "__main__":
    sys.exit(main())
