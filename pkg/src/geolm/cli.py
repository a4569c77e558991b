"""Command-line interface: a thin client over the HTTP service.

Every data command marshals its arguments into the same request models the
service exposes and performs an HTTP call. By default the call runs against
the in-process app (no daemon needed); ``--server URL`` targets a running
instance instead. ``serve`` hosts the service; ``scorer-serve`` hosts the
newline-delimited JSON scoring protocol.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys

import httpx


def _request(server: str | None, method: str, path: str, payload: dict) -> tuple[int, dict]:
    async def go() -> tuple[int, dict]:
        if server:
            transport = None
            base_url = server.rstrip("/")
        else:
            from .service.app import app

            transport = httpx.ASGITransport(app=app, raise_app_exceptions=False)
            base_url = "http://geolm.local"
        async with httpx.AsyncClient(
            transport=transport, base_url=base_url, timeout=None
        ) as client:
            response = await client.request(method, path, json=payload)
        try:
            body = response.json()
        except json.JSONDecodeError:
            body = {"detail": response.text}
        return response.status_code, body

    return asyncio.run(go())


def _call(args: argparse.Namespace, method: str, path: str, payload: dict) -> dict:
    status, body = _request(args.server, method, path, payload)
    if status >= 400:
        print(f"error ({status}): {json.dumps(body.get('detail', body))}", file=sys.stderr)
        raise SystemExit(2)
    return body


def _print_json(data: dict) -> None:
    print(json.dumps(data, indent=2, sort_keys=True))


def cmd_ingest(args: argparse.Namespace) -> int:
    body = _call(
        args,
        "POST",
        "/corpus/ingest",
        {
            "input_path": args.input,
            "output_path": args.out,
            "rules_path": args.rules,
            "stats_path": args.stats,
            "corpus_text_path": args.corpus_text,
        },
    )
    _print_json(body)
    return 0


def cmd_forge(args: argparse.Namespace) -> int:
    body = _call(
        args,
        "POST",
        "/signals/forge",
        {
            "input_path": args.input,
            "output_path": args.out,
            "templates_path": args.templates,
            "plan_path": args.plan,
            "stats_path": args.stats,
            "rejects_path": args.rejects,
            "seed": args.seed,
        },
    )
    _print_json(body)
    return 0


def cmd_pretrain(args: argparse.Namespace) -> int:
    schedule = {
        key: value
        for key, value in (
            ("total_steps", args.steps),
            ("learning_rate", args.lr),
            ("global_batch", args.global_batch),
            ("micro_batch", args.micro_batch),
            ("warmup_steps", args.warmup),
            ("checkpoint_every", args.checkpoint_every),
            ("seed", args.seed),
        )
        if value is not None
    }
    model = json.loads(args.model) if args.model else {}
    body = _call(
        args,
        "POST",
        "/train/pretrain",
        {
            "corpus_path": args.corpus,
            "output_dir": args.out,
            "model": model,
            "schedule": schedule,
            "seed": args.seed or 0,
        },
    )
    _print_json(body)
    return 0


def cmd_tune(args: argparse.Namespace) -> int:
    body = _call(
        args,
        "POST",
        "/tune/run",
        {"base_checkpoint": args.base, "plan_path": args.plan, "output_dir": args.out},
    )
    _print_json(body)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    body = _call(
        args,
        "POST",
        "/eval/run",
        {
            "benchmark_path": args.bench,
            "scorer": args.scorer,
            "evaluator": args.evaluator,
            "report_path": args.report,
            "seed": args.seed,
            "max_new": args.max_new,
        },
    )
    _print_json(body)
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    body = _call(
        args,
        "POST",
        "/generate",
        {
            "scorer": args.scorer,
            "prompt": args.prompt,
            "max_new": args.max_new,
            "mode": args.mode,
            "temperature": args.temperature,
            "seed": args.seed,
        },
    )
    print(body["text"])
    return 0


def cmd_pipeline(args: argparse.Namespace) -> int:
    if args.action == "validate":
        status, body = _request(
            args.server, "POST", "/pipeline/validate", {"config_path": args.config}
        )
        if status >= 400:
            print(f"error ({status}): {body}", file=sys.stderr)
            return 2
        _print_json(body)
        return 0 if body.get("ok") else 1
    if args.action == "run":
        status, body = _request(
            args.server,
            "POST",
            "/pipeline/run",
            {"config_path": args.config, "stages": args.stages, "force": args.force},
        )
        if status == 422:
            _print_json(body.get("detail", body))
            return 1
        if status >= 400:
            print(f"stage failure: {json.dumps(body.get('detail', body))}", file=sys.stderr)
            return 2
        _print_json(body)
        return 0
    body = _call(args, "POST", "/pipeline/report", {"manifest_path": args.manifest})
    print(body["markdown"])
    return 0


def cmd_fixture(args: argparse.Namespace) -> int:
    body = _call(args, "POST", "/fixture", {"output_dir": args.out, "seed": args.seed})
    _print_json(body)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_scorer_serve(args: argparse.Namespace) -> int:
    from .bench.protocol import serve_stdio, serve_tcp
    from .bench.scorers import load_local_scorer

    spec = args.ckpt if not args.adapters else f"{args.ckpt}+{args.adapters}"
    scorer = load_local_scorer(spec)
    if args.mode == "stdio":
        serve_stdio(scorer)
    else:
        print(f"scoring service on {args.host}:{args.port}", file=sys.stderr)
        serve_tcp(scorer, args.host, args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geolm",
        description="Desk-scale domain adaptation pipeline for a small language model.",
    )
    parser.add_argument(
        "--server",
        default=None,
        help="URL of a running geolm service; default runs in-process",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize raw documents into a marker-annotated corpus")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--rules", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", default=None)
    p.add_argument("--corpus-text", default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("forge", help="restructure signals into an instruction dataset")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--templates", default=None)
    p.add_argument("--plan", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", default=None)
    p.add_argument("--rejects", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_forge)

    p = sub.add_parser("pretrain", help="train the base model on a corpus file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--global-batch", type=int, default=None)
    p.add_argument("--micro-batch", type=int, default=None)
    p.add_argument("--warmup", type=int, default=None)
    p.add_argument("--checkpoint-every", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--model", default=None, help="JSON model config overrides")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("tune", help="run a staged adapter-tuning plan")
    p.add_argument("--base", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("eval", help="evaluate a scorer on a benchmark file")
    p.add_argument("--bench", required=True)
    p.add_argument("--scorer", required=True, help="local:ckpt.tlm[+adapters.tla] or remote:host:port")
    p.add_argument("--evaluator", default=None)
    p.add_argument("--report", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-new", type=int, default=48)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("generate", help="generate a continuation from a prompt")
    p.add_argument("--scorer", required=True)
    p.add_argument("--prompt", required=True)
    p.add_argument("--max-new", type=int, default=64)
    p.add_argument("--mode", choices=("greedy", "sample"), default="greedy")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("pipeline", help="validate, run, or report a full pipeline")
    actions = p.add_subparsers(dest="action", required=True)
    v = actions.add_parser("validate")
    v.add_argument("--config", required=True)
    r = actions.add_parser("run")
    r.add_argument("--config", required=True)
    r.add_argument("--stages", nargs="*", default=None)
    r.add_argument("--force", action="store_true")
    m = actions.add_parser("report")
    m.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("fixture", help="write the bundled toy fixture")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=2024)
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("serve", help="host the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("scorer-serve", help="host the NDJSON scoring protocol")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--adapters", default=None)
    p.add_argument("--mode", choices=("tcp", "stdio"), default="tcp")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=9215)
    p.set_defaults(func=cmd_scorer_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
