"""Command-line entry points: build-kg, ask, eval, serve.

Exit codes: 0 success, 1 usage or data error, 2 upstream service failure
(backbone LLM, remote encoder, transcription).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import evaluate as evalmod
from .config import (
    EncoderSettings,
    LlmSettings,
    ServiceAssets,
    build_encoder,
    build_llm,
    load_config,
)
from .corpus import build_index, embed_corpus, ingest
from .embedding import DEFAULT_OFFLINE_DIMENSION, OfflineEncoder
from .errors import (
    DxCopilotError,
    LlmUnavailable,
    ParseFailure,
    RemoteEncoderUnavailable,
    TranscriptionFailure,
)
from .kg import KgConfig, build_kg, load_kg, save_kg
from .kg.build import DEFAULT_DELTA_CAT, DEFAULT_DELTA_SUB
from .orchestrator import PipelineConfig, TemplateQuestionGenerator, one_shot
from .service import create_app, recommendation_to_dict

_UPSTREAM_ERRORS = (LlmUnavailable, RemoteEncoderUnavailable, TranscriptionFailure, ParseFailure)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dxcopilot")
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser("build-kg", help="build the diagnostic knowledge graph from a corpus")
    p_build.add_argument("--corpus", required=True)
    p_build.add_argument("--out", required=True)
    p_build.add_argument("--delta-sub", type=float, default=DEFAULT_DELTA_SUB)
    p_build.add_argument("--delta-cat", type=float, default=DEFAULT_DELTA_CAT)
    p_build.add_argument("--mode", choices=["auto", "cluster", "labels"], default="auto")
    p_build.add_argument("--dimension", type=int, default=DEFAULT_OFFLINE_DIMENSION)

    p_ask = sub.add_parser("ask", help="one-shot diagnostic query")
    p_ask.add_argument("--kg", required=True)
    p_ask.add_argument("--corpus", required=True)
    p_ask.add_argument("--text", required=True)
    p_ask.add_argument("--llm", choices=["stub", "http"], default="stub")
    p_ask.add_argument("--llm-url", default="")
    p_ask.add_argument("--llm-model", default="")
    p_ask.add_argument("--dimension", type=int, default=DEFAULT_OFFLINE_DIMENSION)
    p_ask.add_argument("--k", type=int, default=PipelineConfig.retrieval_k)

    p_eval = sub.add_parser("eval", help="hierarchical accuracy evaluation")
    p_eval.add_argument("--cases", required=True)
    p_eval.add_argument("--kg", required=True)
    p_eval.add_argument("--corpus", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--llm", choices=["stub", "http"], default="stub")
    p_eval.add_argument("--llm-url", default="")
    p_eval.add_argument("--llm-model", default="")
    p_eval.add_argument("--dimension", type=int, default=DEFAULT_OFFLINE_DIMENSION)
    p_eval.add_argument("--modality", choices=["text", "voice"], default="text")
    p_eval.add_argument("--voice-drop-rate", type=float, default=0.1)
    p_eval.add_argument("--seed", type=int, default=0)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--config", required=True)

    return parser


def _make_llm(kind: str, url: str, model: str):
    if kind == "http":
        return build_llm(LlmSettings(kind="http", base_url=url, model=model))
    return build_llm(LlmSettings(kind="oracle-stub"))


def _load_ask_assets(args) -> ServiceAssets:
    encoder = build_encoder(EncoderSettings(kind="offline", dimension=args.dimension))
    corpus = embed_corpus(ingest(args.corpus), encoder)
    index = build_index(corpus)
    kg = load_kg(args.kg)
    llm = _make_llm(args.llm, args.llm_url, args.llm_model)
    return ServiceAssets(
        kg=kg,
        corpus=corpus,
        index=index,
        encoder=encoder,
        llm=llm,
        transcriber=None,  # type: ignore[arg-type]  # not used by ask/eval
        question_generator=TemplateQuestionGenerator(),
        pipeline=PipelineConfig(),
    )


def _cmd_build_kg(args) -> int:
    encoder = OfflineEncoder(dimension=args.dimension)
    corpus = embed_corpus(ingest(args.corpus), encoder)
    config = KgConfig(delta_sub=args.delta_sub, delta_cat=args.delta_cat, mode=args.mode)
    kg = build_kg(corpus, config)
    save_kg(kg, args.out)
    counts = kg.tier_counts()
    print(
        f"4 tiers: {counts['category']}/{counts['subcategory']}/"
        f"{counts['disease']}/{counts['feature']} "
        "(categories/subcategories/diseases/features)"
    )
    print(f"wrote {args.out}")
    return 0


def _cmd_ask(args) -> int:
    if not args.text.strip():
        print("error: --text must be non-empty", file=sys.stderr)
        return 1
    assets = _load_ask_assets(args)
    rec = one_shot(
        args.text,
        assets.kg,
        assets.corpus,
        assets.index,
        assets.encoder,
        assets.llm,
        PipelineConfig(retrieval_k=args.k),
        assets.question_generator,
    )
    print(json.dumps(recommendation_to_dict(rec), ensure_ascii=False, indent=2))
    return 0


def _cmd_eval(args) -> int:
    cases = evalmod.load_cases(args.cases)
    assets = _load_ask_assets(args)
    label = f"{'oracle-stub' if args.llm == 'stub' else 'http'} {args.modality}"
    report = evalmod.evaluate(
        cases,
        assets,
        label=label,
        modality=args.modality,
        voice_drop_rate=args.voice_drop_rate if args.modality == "voice" else 0.0,
        seed=args.seed,
    )
    Path(args.out).write_text(
        json.dumps(evalmod.report_to_dict(report), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    print(evalmod.render_table([report]))
    print(f"wrote {args.out}")
    return 0


def _cmd_serve(args) -> int:
    config = load_config(args.config)
    for path, what in ((config.kg_path, "kg_path"), (config.corpus_path, "corpus_path")):
        if not path or not Path(path).exists():
            print(f"error: FileNotFound: {what} {path!r} does not exist", file=sys.stderr)
            return 1
    from .config import load_assets

    assets = load_assets(config)
    app = create_app(assets, config.service)
    import uvicorn

    uvicorn.run(app, host=config.service.host, port=config.service.port)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "build-kg": _cmd_build_kg,
        "ask": _cmd_ask,
        "eval": _cmd_eval,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except _UPSTREAM_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (DxCopilotError, FileNotFoundError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
