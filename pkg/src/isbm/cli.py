"""Command-line client for the service: builds a request from flags, posts it
to an in-process app (or a remote server via --server), and writes the
returned artifacts."""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import httpx

from .alpha import parse_alpha_inline
from .verify import SUITE_NAMES

__all__ = ["RunConfig", "parse_args", "run", "main"]


@dataclass
class RunConfig:
    """Resolved invocation: route, request payload, and local artifact paths."""

    command: str
    payload: dict = field(default_factory=dict)
    out: str | None = None
    report: str | None = None
    server: str | None = None
    host: str = "127.0.0.1"
    port: int = 8000


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("ISBM_THREADS", "1")))
    except ValueError:
        return 1


def _add_alpha_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--alpha", help="inline step spec `t0:a0,t1:a1,...` (t0 must be 0)")
    sub.add_argument("--alpha-file", help="path to a `t,alpha` CSV; --alpha wins when both are given")


def _add_common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--threads", type=int, default=_default_threads(),
                     help="worker threads (default: env ISBM_THREADS or 1)")
    sub.add_argument("--report", help="write a JSON run report here")
    sub.add_argument("--server", help="base URL of a running service; default runs in process")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isbm",
        description="Simulate sign-flipped Brownian paths, evaluate their transition "
                    "kernel, and run the verification suites.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="simulate skew paths to CSV")
    _add_alpha_flags(sim)
    _add_common_flags(sim)
    sim.add_argument("--horizon", type=float, default=1.0)
    sim.add_argument("--dt", type=float, default=1e-3)
    sim.add_argument("--paths", type=int, default=1)
    sim.add_argument("--x", type=float, default=0.0, help="starting point")
    sim.add_argument("--out", help="CSV output path (stdout when omitted)")

    den = subs.add_parser("density", help="evaluate the transition kernel on a y grid")
    _add_alpha_flags(den)
    _add_common_flags(den)
    den.add_argument("--s", type=float, default=0.0)
    den.add_argument("--t", type=float, default=1.0)
    den.add_argument("--x", type=float, default=0.0)
    den.add_argument("--y-grid", default="-3:3:0.01", help="min:max:step")
    den.add_argument("--quad-tol", type=float, default=1e-8)
    den.add_argument("--out", help="CSV output path (stdout when omitted)")

    ver = subs.add_parser("verify", help="run a named verification suite")
    _add_alpha_flags(ver)
    _add_common_flags(ver)
    ver.add_argument("--suite", default="all", choices=list(SUITE_NAMES))
    ver.add_argument("--paths", type=int)
    ver.add_argument("--dt", type=float)
    ver.add_argument("--eps", type=float)
    ver.add_argument("--t", type=float)
    ver.add_argument("--s", type=float)
    ver.add_argument("--x", type=float, default=0.0)
    ver.add_argument("--horizon", type=float, default=1.0)
    ver.add_argument("--quad-tol", type=float, default=1e-8)

    sta = subs.add_parser("stability", help="coupled convergence of approximating solutions")
    _add_alpha_flags(sta)
    _add_common_flags(sta)
    sta.add_argument("--alpha-seq", required=True,
                     help="text file: header `alpha`, one inline step spec per line")
    sta.add_argument("--paths", type=int, default=2_000)
    sta.add_argument("--dt", type=float, default=1e-4)
    sta.add_argument("--horizon", type=float, default=1.0)
    sta.add_argument("--out", help="CSV of squared sup distances (stdout when omitted)")

    srv = subs.add_parser("serve", help="start the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)

    return parser


def _resolve_alpha(parser: argparse.ArgumentParser, ns: argparse.Namespace) -> dict:
    """Inline flag wins over the file; grammar problems are usage errors."""
    if ns.alpha is not None:
        try:
            parse_alpha_inline(ns.alpha)
        except ValueError as exc:
            parser.error(str(exc))
        return {"alpha": ns.alpha}
    if ns.alpha_file is not None:
        try:
            text = Path(ns.alpha_file).read_text()
        except OSError as exc:
            parser.error(f"cannot read alpha file {ns.alpha_file}: {exc}")
        return {"alpha_csv": text}
    parser.error("one of --alpha or --alpha-file is required")


def _read_alpha_seq(parser: argparse.ArgumentParser, path: str) -> list:
    try:
        lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    except OSError as exc:
        parser.error(f"cannot read alpha sequence file {path}: {exc}")
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != "alpha":
        parser.error(f"alpha sequence file {path} must start with an `alpha` header line")
    specs = lines[1:]
    if not specs:
        parser.error(f"alpha sequence file {path} lists no step functions")
    for spec in specs:
        try:
            parse_alpha_inline(spec)
        except ValueError as exc:
            parser.error(f"in {path}: {exc}")
    return specs


def _merge_negative_grid_values(argv):
    """`--y-grid -3:3:0.01` would be read as a new option by argparse; weld the
    value onto the flag."""
    if argv is None:
        return None
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok == "--y-grid" and i + 1 < len(argv) and argv[i + 1].startswith("-") and ":" in argv[i + 1]:
            out.append(f"--y-grid={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def parse_args(argv) -> RunConfig:
    parser = build_parser()
    ns = parser.parse_args(_merge_negative_grid_values(argv))
    cfg = RunConfig(command=ns.command)

    if ns.command == "serve":
        cfg.host, cfg.port = ns.host, ns.port
        return cfg

    cfg.out = getattr(ns, "out", None)
    cfg.report = ns.report
    cfg.server = ns.server
    payload = _resolve_alpha(parser, ns)
    payload.update({"seed": ns.seed, "threads": ns.threads})

    if ns.command == "simulate":
        payload.update({"horizon": ns.horizon, "dt": ns.dt, "paths": ns.paths, "x0": ns.x})
    elif ns.command == "density":
        try:
            lo, hi, step = (float(tok) for tok in ns.y_grid.split(":"))
        except ValueError:
            parser.error(f"malformed --y-grid {ns.y_grid!r} (expected min:max:step)")
        if step <= 0 or hi <= lo:
            parser.error(f"empty --y-grid {ns.y_grid!r}")
        payload.pop("threads")
        payload.pop("seed")
        payload.update({"s": ns.s, "t": ns.t, "x": ns.x, "y_min": lo, "y_max": hi,
                        "y_step": step, "quad_tol": ns.quad_tol})
    elif ns.command == "verify":
        payload.update({"suite": ns.suite, "x": ns.x, "quad_tol": ns.quad_tol,
                        "horizon": ns.horizon})
        for key in ("paths", "dt", "eps", "t", "s"):
            value = getattr(ns, key)
            if value is not None:
                payload[key] = value
    elif ns.command == "stability":
        payload.update({"alpha_seq": _read_alpha_seq(parser, ns.alpha_seq),
                        "paths": ns.paths, "dt": ns.dt, "horizon": ns.horizon})
    cfg.payload = payload
    return cfg


_ROUTES = {"simulate": "/simulate", "density": "/density", "verify": "/verify",
           "stability": "/stability"}


def _call_service(cfg: RunConfig):
    route = _ROUTES[cfg.command]
    if cfg.server:
        with httpx.Client(base_url=cfg.server, timeout=None) as client:
            return client.post(route, json=cfg.payload)

    from .service import app

    async def go():
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport, base_url="http://isbm.internal",
                                     timeout=None) as client:
            return await client.post(route, json=cfg.payload)

    return asyncio.run(go())


def _write_text(path: str, text: str) -> bool:
    try:
        Path(path).write_text(text)
        return True
    except OSError as exc:
        print(f"error: cannot write {path}: {exc}", file=sys.stderr)
        return False


def _emit(cfg: RunConfig, body: dict, reports: list, passed: bool) -> int:
    code = 0 if passed else 1
    csv_text = body.get("csv")
    if csv_text is not None:
        if cfg.out:
            if not _write_text(cfg.out, csv_text):
                return 1
        else:
            sys.stdout.write(csv_text)
    if cfg.report:
        run_report = {
            "command": cfg.command,
            "config": {**cfg.payload, "out": cfg.out, "report": cfg.report},
            "reports": reports,
            "pass": passed,
            "outputs": {"csv": cfg.out},
            "meta": {"generated_at": datetime.now(timezone.utc).isoformat()},
        }
        if not _write_text(cfg.report, json.dumps(run_report, indent=2, sort_keys=True) + "\n"):
            return 1
    return code


def run(cfg: RunConfig) -> int:
    if cfg.command == "serve":
        import uvicorn

        from .service import app

        uvicorn.run(app, host=cfg.host, port=cfg.port)
        return 0

    try:
        resp = _call_service(cfg)
    except httpx.HTTPError as exc:
        print(f"error: service request failed: {exc}", file=sys.stderr)
        return 1
    if resp.status_code in (400, 422):
        print(f"error: invalid request: {resp.text}", file=sys.stderr)
        return 2
    if resp.status_code != 200:
        print(f"error: service returned {resp.status_code}: {resp.text}", file=sys.stderr)
        return 1
    body = resp.json()

    if cfg.command == "verify":
        reports = body["reports"]
        passed = body["passed"]
        for rep in reports:
            print(f"[{'PASS' if rep['pass'] else 'FAIL'}] {rep['experiment']}")
        return _emit(cfg, body, reports, passed)
    if cfg.command == "stability":
        report = body["report"]
        print(f"[{'PASS' if report['pass'] else 'FAIL'}] {report['experiment']}")
        return _emit(cfg, body, [report], report["pass"])
    return _emit(cfg, body, [], True)


def main(argv=None) -> int:
    return run(parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
