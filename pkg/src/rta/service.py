"""HTTP gateway: the gate behind a wire API, with an owned audit log.

Boot is fail-closed: constraint sets, the optional scoring model, and
the audit log must all load and validate before the app exists; a
partially configured gateway never serves. The server supplies the
evaluation clock (clients cannot replay stale timing), and every
evaluation is appended to the audit log before the response goes out,
so an ALLOW on the wire implies a durable record of it.
"""

from __future__ import annotations

import json
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .audit import AuditLog
from .decision import decision_hash, format_clock, parse_decision
from .dsl import load_constraint_dir
from .errors import AuditError, ConfigError, DecisionParseError, ScoringError
from .evaluator import GateReport, evaluate, unknown_class_outcome
from .scoring import load_model_file, score

UNKNOWN_CLASS_POLICIES = ("escalate", "reject_error")


@dataclass(frozen=True)
class GatewayConfig:
    constraint_dir: str
    audit_log_path: str
    listen_host: str = "127.0.0.1"
    listen_port: int = 8300
    scoring_model_path: Optional[str] = None
    unknown_class_policy: str = "escalate"


def config_from_value(tree: Any, base_dir: Optional[Path] = None) -> GatewayConfig:
    """Build a config from parsed TOML/JSON; relative paths resolve
    against the config file's directory.
    """
    if not isinstance(tree, dict):
        raise ConfigError("gateway config must be a table/object")
    known = {
        "constraint_dir", "audit_log_path", "listen", "scoring_model_path",
        "unknown_class_policy",
    }
    unknown = sorted(set(tree) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for key in ("constraint_dir", "audit_log_path"):
        if key not in tree or not isinstance(tree[key], str):
            raise ConfigError(f"config needs a string {key!r}")

    def resolve(p: str) -> str:
        path = Path(p)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return str(path)

    host, port = "127.0.0.1", 8300
    listen = tree.get("listen")
    if listen is not None:
        if not isinstance(listen, str) or ":" not in listen:
            raise ConfigError("listen must be \"host:port\"")
        host, _, port_text = listen.rpartition(":")
        try:
            port = int(port_text)
        except ValueError:
            raise ConfigError(f"bad listen port {port_text!r}") from None
        if not host:
            raise ConfigError("listen must name a host")
    model_path = tree.get("scoring_model_path")
    if model_path is not None and not isinstance(model_path, str):
        raise ConfigError("scoring_model_path must be a string")
    policy = tree.get("unknown_class_policy", "escalate")
    if policy not in UNKNOWN_CLASS_POLICIES:
        raise ConfigError(
            f"unknown_class_policy must be one of {UNKNOWN_CLASS_POLICIES}, got {policy!r}"
        )
    return GatewayConfig(
        constraint_dir=resolve(tree["constraint_dir"]),
        audit_log_path=resolve(tree["audit_log_path"]),
        listen_host=host,
        listen_port=port,
        scoring_model_path=resolve(model_path) if model_path else None,
        unknown_class_policy=policy,
    )


def load_config(path) -> GatewayConfig:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        if path.suffix.lower() == ".json":
            tree = json.loads(data.decode("utf-8"))
        else:
            tree = tomllib.loads(data.decode("utf-8"))
    except (json.JSONDecodeError, tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return config_from_value(tree, base_dir=path.parent)


def _error_body(code: str, message: str) -> Dict[str, Any]:
    return {"error": {"code": code, "message": message}}


def _now_clock() -> str:
    return format_clock(datetime.now(timezone.utc))


def create_app(config: GatewayConfig, clock_fn: Optional[Callable[[], str]] = None) -> FastAPI:
    """Load everything eagerly (fail-closed boot) and build the app.

    ``clock_fn`` overrides the server clock; tests pin it for
    reproducible evaluations.
    """
    constraint_sets = load_constraint_dir(config.constraint_dir)
    if not constraint_sets:
        raise ConfigError(f"no constraint sets found in {config.constraint_dir}")
    model = (
        load_model_file(config.scoring_model_path)
        if config.scoring_model_path
        else None
    )
    log = AuditLog(config.audit_log_path)
    clock = clock_fn or _now_clock
    append_lock = threading.Lock()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        log.close()

    app = FastAPI(lifespan=lifespan, docs_url=None, redoc_url=None, openapi_url=None)
    app.state.audit_log = log
    app.state.constraint_sets = constraint_sets

    def require_json(request: Request) -> Optional[JSONResponse]:
        content_type = request.headers.get("content-type", "")
        if content_type.split(";")[0].strip().lower() != "application/json":
            return JSONResponse(
                status_code=415,
                content=_error_body("UNSUPPORTED_MEDIA_TYPE",
                                    "request body must be application/json"),
            )
        return None

    @app.post("/v1/evaluate")
    async def evaluate_endpoint(request: Request):
        wrong_type = require_json(request)
        if wrong_type is not None:
            return wrong_type
        body = await request.body()
        try:
            decision = parse_decision(body)
        except DecisionParseError as exc:
            return JSONResponse(status_code=400,
                                content=_error_body(exc.code, Exception.__str__(exc)))
        now = clock()
        cset = constraint_sets.get(decision.decision_class)
        if cset is None:
            if config.unknown_class_policy == "reject_error":
                return JSONResponse(
                    status_code=422,
                    content=_error_body(
                        "UNKNOWN_CLASS",
                        f"no constraint set loaded for class {decision.decision_class!r}",
                    ),
                )
            report = GateReport(
                decision_class=decision.decision_class,
                decision_hash=decision_hash(decision),
                evaluation_clock=now,
                verdicts=(),
                outcome=unknown_class_outcome(decision.decision_class),
            )
        else:
            report = evaluate(cset, decision, now)
        try:
            with append_lock:
                log.append(report, now)
        except AuditError as exc:
            # Never hand out an unlogged outcome, least of all an ALLOW.
            return JSONResponse(status_code=503,
                                content=_error_body(exc.code, Exception.__str__(exc)))
        return JSONResponse(status_code=200, content=report.to_value_tree())

    @app.post("/v1/score")
    async def score_endpoint(request: Request):
        wrong_type = require_json(request)
        if wrong_type is not None:
            return wrong_type
        if model is None:
            return JSONResponse(status_code=404,
                                content=_error_body("NO_MODEL", "no scoring model configured"))
        body = await request.body()
        try:
            decision = parse_decision(body)
        except DecisionParseError as exc:
            return JSONResponse(status_code=400,
                                content=_error_body(exc.code, Exception.__str__(exc)))
        try:
            report = score(model, decision)
        except ScoringError as exc:
            return JSONResponse(status_code=422,
                                content=_error_body(exc.code, Exception.__str__(exc)))
        return JSONResponse(status_code=200, content=report.to_value_tree())

    @app.get("/v1/healthz")
    async def healthz_endpoint():
        writable = log.is_open
        body = {
            "status": "ok" if writable else "degraded",
            "loaded_classes": sorted(constraint_sets),
            "audit_seq": log.last_seq,
        }
        return JSONResponse(status_code=200 if writable else 503, content=body)

    return app


def serve(config: GatewayConfig, clock_fn: Optional[Callable[[], str]] = None) -> None:
    """Run the gateway until signaled; boot failures raise before binding."""
    import uvicorn

    app = create_app(config, clock_fn=clock_fn)
    uvicorn.run(app, host=config.listen_host, port=config.listen_port, log_level="warning")
