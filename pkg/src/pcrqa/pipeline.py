"""File-based pipeline stages: each reads its predecessor's artifact.

Stage outputs are deterministic for a fixed config and inputs; every stage
also drops a <stage>.manifest.json with the config hash, input hashes, and
library versions (the manifest timestamp is the only non-reproducible
byte).
"""

import hashlib
import json
import logging
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, answer, ingest, metrics, model, remote
from .codegraph.graphs import DepGraph, graph_for_source
from .config import PipelineConfig
from .dataset import (
    Necessity,
    ReviewRequest,
    TagVocabulary,
    build_requests,
    corpus_stats,
    filter_rare_tags,
    load_corpus,
    load_folds,
    save_corpus,
    save_folds,
    split_folds,
)
from .knowledge import KnowledgeBase, extract_terms, load_knowledge, render_knowledge_prefix
from .prompt import PromptInstance, assemble_prompt, build_template
from .tokens import PAD

logger = logging.getLogger(__name__)

NECESSITY_TOKENS = {Necessity.NECESSARY: "yes", Necessity.UNNECESSARY: "no"}

POSTS_FILE = "posts.ndjson"
CORPUS_FILE = "corpus.ndjson"
VOCAB_FILE = "vocab.json"
FOLDS_FILE = "folds.json"
STATS_FILE = "stats.json"
GRAPHS_FILE = "graphs.ndjson"
CHECKPOINT_FILE = "checkpoint.json"
PREDICTIONS_FILE = "predictions.ndjson"
REPORT_FILE = "report.json"


class MissingInputError(FileNotFoundError):
    def __init__(self, path: Path):
        super().__init__(str(path))
        self.path = path


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingInputError(path)
    return path


def _hash_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def write_manifest(cfg: PipelineConfig, stage: str, inputs: list[Path], out_dir: Path) -> None:
    manifest = {
        "stage": stage,
        "config_hash": cfg.hash(),
        "input_hashes": {str(p): _hash_file(p) for p in inputs},
        "versions": {
            "pcrqa": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
        },
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    with open(out_dir / f"{stage}.manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)


def open_knowledge(cfg: PipelineConfig) -> KnowledgeBase:
    if cfg.knowledge_file:
        with open(_require(Path(cfg.knowledge_file)), encoding="utf-8") as fh:
            return load_knowledge(fh)
    ref = resources.files("pcrqa.data") / "knowledge_base.jsonl"
    with ref.open("r", encoding="utf-8") as fh:
        return load_knowledge(fh)


# --- stages -------------------------------------------------------------------


def stage_ingest(cfg: PipelineConfig) -> Path:
    from_stdin = cfg.dump == "-"
    dump = None if from_stdin else _require(Path(cfg.dump))
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / POSTS_FILE
    post_types = tuple(cfg.post_types.split(","))
    n_posts = n_errors = 0
    src = sys.stdin.buffer if from_stdin else open(dump, "rb")
    try:
        with open(out_path, "w", encoding="utf-8") as dst:
            for item in ingest.stream_posts(src, post_types=post_types):
                if isinstance(item, ingest.RowError):
                    dst.write(json.dumps(ingest.error_to_record(item), sort_keys=True) + "\n")
                    n_errors += 1
                    continue
                try:
                    record = ingest.post_to_record(item)
                except ingest.TagFormatError as exc:
                    dst.write(
                        json.dumps({"error": str(exc), "offset": item.id}, sort_keys=True) + "\n"
                    )
                    n_errors += 1
                    continue
                dst.write(json.dumps(record, sort_keys=True) + "\n")
                n_posts += 1
    finally:
        if not from_stdin:
            src.close()
    logger.info("ingest: %d posts, %d error records -> %s", n_posts, n_errors, out_path)
    write_manifest(cfg, "ingest", [] if from_stdin else [dump], out_dir)
    return out_path


def stage_preprocess(cfg: PipelineConfig) -> Path:
    out_dir = Path(cfg.out_dir)
    posts_path = _require(out_dir / POSTS_FILE)
    records = []
    with open(posts_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            if "error" in rec:
                continue
            if not rec.get("tags"):
                continue
            records.append(rec)
    requests = build_requests(records, cfg.necessity_threshold)
    corpus, vocab = filter_rare_tags(requests, cfg.rare_tag_theta)
    if len(corpus) < cfg.folds:
        raise ValueError(
            f"filtered corpus has {len(corpus)} requests; needs >= folds ({cfg.folds})"
        )
    splits = split_folds(len(corpus), cfg.folds, cfg.seed)
    save_corpus(corpus, out_dir / CORPUS_FILE)
    with open(out_dir / VOCAB_FILE, "w", encoding="utf-8") as fh:
        fh.write(vocab.to_json())
    save_folds(splits, out_dir / FOLDS_FILE)
    stats = [corpus_stats(corpus, split, vocab) for split in splits]
    with open(out_dir / STATS_FILE, "w", encoding="utf-8") as fh:
        json.dump([s.__dict__ for s in stats], fh, sort_keys=True, indent=1)
    logger.info(
        "preprocess: %d requests, %d tags -> %s", len(corpus), len(vocab), out_dir
    )
    write_manifest(cfg, "preprocess", [posts_path], out_dir)
    return out_dir / CORPUS_FILE


def request_code_source(req: ReviewRequest) -> str:
    return "\n".join(req.code_snippets)


def stage_graph(cfg: PipelineConfig) -> Path:
    out_dir = Path(cfg.out_dir)
    corpus_path = _require(out_dir / CORPUS_FILE)
    corpus = load_corpus(corpus_path)
    out_path = out_dir / GRAPHS_FILE
    with open(out_path, "w", encoding="utf-8") as fh:
        for req in corpus:
            _, _, _, pdg = graph_for_source(request_code_source(req), cfg.code_len)
            emb = model.encode_code_graph(pdg, cfg.embedding_dim)
            fh.write(
                json.dumps(
                    {"id": req.id, "ref": emb.provenance, "graph": pdg.to_payload()},
                    sort_keys=True,
                )
                + "\n"
            )
    logger.info("graph: %d dependence graphs -> %s", len(corpus), out_path)
    write_manifest(cfg, "graph", [corpus_path], out_dir)
    return out_path


def load_graphs(path: Path) -> dict[int, dict]:
    graphs = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                graphs[rec["id"]] = rec
    return graphs


def gold_tag_tokens(req: ReviewRequest, vocab: TagVocabulary, tag_mask_count: int) -> list[str]:
    """Flatten the request's tag words in order, cut/pad to the mask count."""
    words: list[str] = []
    for tag in req.tags:
        if tag in vocab:
            words.extend(vocab.words(tag))
    words = words[:tag_mask_count]
    words.extend([PAD] * (tag_mask_count - len(words)))
    return words


def build_instances(
    corpus: list[ReviewRequest],
    vocab: TagVocabulary,
    kb: KnowledgeBase,
    graphs: dict[int, dict],
    cfg: PipelineConfig,
    model_vocab: Optional[set[str]] = None,
) -> list[tuple[PromptInstance, list[str]]]:
    """One (instance, gold tokens) pair per request, in corpus order."""
    template = build_template(cfg.tag_mask_count)
    out = []
    for req in corpus:
        entries = extract_terms(req, kb, model_vocab=model_vocab)
        prefix = render_knowledge_prefix(entries, cfg.prefix_len)
        graph_ref = graphs.get(req.id, {}).get("ref", "")
        instance = assemble_prompt(req, template, prefix, graph_ref, cfg.max_len)
        gold = gold_tag_tokens(req, vocab, cfg.tag_mask_count)
        gold.append(NECESSITY_TOKENS[req.necessity])
        out.append((instance, gold))
    return out


def _load_shared(cfg: PipelineConfig):
    out_dir = Path(cfg.out_dir)
    corpus = load_corpus(_require(out_dir / CORPUS_FILE))
    with open(_require(out_dir / VOCAB_FILE), encoding="utf-8") as fh:
        vocab = TagVocabulary.from_json(fh.read())
    splits = load_folds(_require(out_dir / FOLDS_FILE))
    graphs = load_graphs(_require(out_dir / GRAPHS_FILE))
    kb = open_knowledge(cfg)
    return out_dir, corpus, vocab, splits, graphs, kb


def _register_graphs(state: model.ModelState, graphs: dict[int, dict], ids) -> None:
    for i in ids:
        rec = graphs.get(i)
        if rec is None:
            continue
        pdg = DepGraph.from_payload(rec["graph"])
        state_ref = model.register_graph(state, model.encode_code_graph(pdg, state.embedding_dim))
        if state_ref != rec["ref"]:
            logger.warning("graph %s: stored ref differs from recomputed", i)


def stage_train(cfg: PipelineConfig) -> Path:
    out_dir, corpus, vocab, splits, graphs, kb = _load_shared(cfg)
    train_idx, _, _ = splits[cfg.fold]
    train_corpus = [corpus[i] for i in train_idx]
    examples = build_instances(train_corpus, vocab, kb, graphs, cfg)
    token_sources = [list(tok for seg in inst.segments for tok in (seg.tokens or ())) for inst, _ in examples]
    token_sources.extend([gold for _, gold in examples])
    token_sources.append(vocab.all_words())
    token_sources.append(list(NECESSITY_TOKENS.values()))
    vocab_tokens = model.build_vocabulary(token_sources)
    state = model.init_state(vocab_tokens, cfg.embedding_dim, cfg.prefix_len, cfg.seed)
    _register_graphs(state, graphs, [corpus[i].id for i in train_idx])
    result = model.train(
        state,
        examples,
        model.TrainConfig(
            learning_rate=cfg.learning_rate,
            epochs=cfg.epochs,
            batch_size=cfg.batch_size,
            seed=cfg.seed,
        ),
    )
    for epoch, loss in enumerate(result.epoch_losses, start=1):
        logger.info("train: epoch %d mean loss %.6f", epoch, loss)
    out_path = out_dir / CHECKPOINT_FILE
    model.save_checkpoint(result.state, out_path)
    write_manifest(
        cfg,
        "train",
        [out_dir / CORPUS_FILE, out_dir / VOCAB_FILE, out_dir / FOLDS_FILE, out_dir / GRAPHS_FILE],
        out_dir,
    )
    return out_path


def _split_indices(splits, cfg: PipelineConfig) -> list[int]:
    train_idx, val_idx, test_idx = splits[cfg.fold]
    if cfg.split == "train":
        return train_idx
    if cfg.split == "val":
        return val_idx
    if cfg.split == "test":
        return test_idx
    return sorted(train_idx + val_idx + test_idx)


def stage_predict(cfg: PipelineConfig) -> Path:
    out_dir, corpus, vocab, splits, graphs, kb = _load_shared(cfg)
    indices = _split_indices(splits, cfg)
    subset = [corpus[i] for i in indices]
    use_remote = cfg.backend != "builtin"
    state = None
    if not use_remote:
        state = model.load_checkpoint(_require(out_dir / CHECKPOINT_FILE))
        _register_graphs(state, graphs, [r.id for r in subset])
    examples = build_instances(subset, vocab, kb, graphs, cfg)
    top_k = cfg.top_k
    out_path = out_dir / PREDICTIONS_FILE
    with open(out_path, "w", encoding="utf-8") as fh:
        for req, (instance, _) in zip(subset, examples):
            if use_remote:
                preds = remote.remote_predict(cfg.backend, instance, top_k)
            else:
                preds = model.predict_masks(state, instance, min(top_k, len(state.vocab)))
            tag_maps = answer.map_tag_predictions(preds[:-1], vocab, max(cfg.k_set))
            necessity = answer.decide_necessity(preds[-1])
            fh.write(
                json.dumps(answer.prediction_to_record(req.id, tag_maps, necessity), sort_keys=True)
                + "\n"
            )
    logger.info("predict: %d requests -> %s", len(subset), out_path)
    inputs = [out_dir / CORPUS_FILE, out_dir / VOCAB_FILE, out_dir / FOLDS_FILE, out_dir / GRAPHS_FILE]
    if not use_remote:
        inputs.append(out_dir / CHECKPOINT_FILE)
    write_manifest(cfg, "predict", inputs, out_dir)
    return out_path


def stage_evaluate(cfg: PipelineConfig) -> Path:
    out_dir = Path(cfg.out_dir)
    predictions_path = _require(out_dir / PREDICTIONS_FILE)
    corpus = load_corpus(_require(out_dir / CORPUS_FILE))
    by_id = {req.id: req for req in corpus}
    samples = []
    with open(predictions_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            req = by_id[rec["id"]]
            samples.append(
                metrics.EvalSample(
                    true_tags=frozenset(req.tags),
                    predicted_tags=tuple(t["label"] for t in rec["predicted_tags"]),
                    gold_necessity=req.necessity,
                    predicted_necessity=Necessity(rec["necessity"]),
                )
            )
    report = metrics.evaluate_samples(samples, cfg.k_set, fold_id=cfg.fold)
    out_path = out_dir / REPORT_FILE
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_payload(), fh, sort_keys=True, indent=1)
    logger.info("evaluate:\n%s", metrics.render_table(report))
    write_manifest(cfg, "evaluate", [predictions_path, out_dir / CORPUS_FILE], out_dir)
    return out_path


STAGES = {
    "ingest": stage_ingest,
    "preprocess": stage_preprocess,
    "graph": stage_graph,
    "train": stage_train,
    "predict": stage_predict,
    "evaluate": stage_evaluate,
}

STAGE_ORDER = ("ingest", "preprocess", "graph", "train", "predict", "evaluate")


def run_stage(name: str, cfg: PipelineConfig) -> Path:
    if name == "all":
        last = None
        for stage in STAGE_ORDER:
            last = STAGES[stage](cfg)
        return last
    return STAGES[name](cfg)
