"""HTTP service for query answering and interactive litigation sessions.

Sessions are in-memory: each holds a pattern graph and an accumulating fact
script; every accepted act triggers a full re-evaluation (graphs are small,
correctness beats cleverness). Act handling per session is serialized; the
store and index are shared read-only.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field

from starlette.applications import Starlette
from starlette.middleware import Middleware
from starlette.middleware.cors import CORSMiddleware
from starlette.requests import Request
from starlette.responses import JSONResponse, PlainTextResponse, Response as HttpResponse
from starlette.routing import Route

from krag.dsl import Act, ActKind, FactScript, parse_facts
from krag.errors import KragError
from krag.generation import (
    ExternalTimeoutError,
    ExternalUnavailableError,
    Generator,
    Strategy,
    generator_from_env,
)
from krag.inference import (
    LitigationState,
    evaluate,
    explanation_to_dict,
)
from krag.knowledge import KnowledgeStore, graph_to_dict
from krag.model import EmptyLabelError, Role, VerdictMap, canonicalize_label
from krag.pipeline import (
    EmptyStoreError,
    InstantiatedCase,
    KragConfig,
    answer_query,
    instantiate_graph,
    select_pattern_graph,
)
from krag.render import FORMATS, UnknownFormatError, render_graph
from krag.retrieval import RetrievalConfig, RetrievalIndex, build_index, retrieve


@dataclass
class Session:
    id: str
    pattern_id: str
    case: InstantiatedCase
    acts: list[Act] = field(default_factory=list)
    verdicts: VerdictMap | None = None
    revision: int = 0
    created_at: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock)


def _verdicts_to_dict(verdicts: VerdictMap) -> dict:
    return {nid: status.value for nid, status in sorted(verdicts.statuses.items())}


def _acts_to_list(acts: list[Act]) -> list[dict]:
    return [
        {"act": a.kind.value, "party": a.party, "fact": a.fact, "note": a.note}
        for a in acts
    ]


class AppState:
    def __init__(self, store: KnowledgeStore, config: KragConfig, generator: Generator,
                 index: RetrievalIndex):
        self.store = store
        self.config = config
        self.generator = generator
        self.index = index
        self.sessions: dict[str, Session] = {}
        self.sessions_lock = threading.Lock()

    def new_session(self, pattern_id: str, acts: list[Act] | None = None) -> Session:
        point = self.store.points[pattern_id]
        case = instantiate_graph(point, None)
        session = Session(uuid.uuid4().hex, pattern_id, case)
        for act in acts or []:
            _apply_act(session, act)
        if session.verdicts is None:
            _reevaluate(session)
        with self.sessions_lock:
            self.sessions[session.id] = session
        return session


def _reevaluate(session: Session) -> None:
    scenario = session.case.graph.scenario
    script = FactScript(scenario, tuple(session.acts))
    state = LitigationState.from_script(script, scenario)
    session.case = InstantiatedCase(
        session.case.graph,
        state,
        session.case.burdens,
        tuple(sorted({a.fact for a in session.acts if a.fact not in session.case.graph.labels})),
    )
    session.verdicts = evaluate(session.case.graph, state, session.case.burdens)


def _apply_act(session: Session, act: Act) -> None:
    session.acts.append(act)
    session.revision += 1
    _reevaluate(session)


def _session_payload(session: Session, render_format: str = "mermaid") -> dict:
    assert session.verdicts is not None
    return {
        "session_id": session.id,
        "pattern_id": session.pattern_id,
        "graph": graph_to_dict(session.case.graph),
        "verdicts": _verdicts_to_dict(session.verdicts),
        "acts": _acts_to_list(session.acts),
        "unmatched": list(session.case.unmatched),
        "revision": session.revision,
        "created_at": session.created_at,
        "graph_render": render_graph(session.case.graph, session.verdicts, render_format),
    }


def create_app(
    store: KnowledgeStore,
    config: KragConfig | None = None,
    generator: Generator | None = None,
    retrieval_config: RetrievalConfig | None = None,
    cors_origins: tuple[str, ...] = ("*",),
) -> Starlette:
    config = config or KragConfig(render_format="mermaid")
    generator = generator or generator_from_env()
    index = build_index(store, retrieval_config)
    state = AppState(store, config, generator, index)

    def error(status: int, message: str) -> JSONResponse:
        return JSONResponse({"error": message}, status_code=status)

    async def healthz(request: Request) -> PlainTextResponse:
        return PlainTextResponse("ok")

    async def query(request: Request) -> JSONResponse:
        try:
            body = await request.json()
        except Exception:
            return error(400, "request body must be a JSON object")
        if not isinstance(body, dict) or not isinstance(body.get("query"), str) or not body["query"].strip():
            return error(400, "field 'query' (non-empty string) is required")
        facts = None
        if body.get("facts"):
            if not isinstance(body["facts"], str):
                return error(400, "field 'facts' must be fact-script text")
            try:
                facts = parse_facts(body["facts"], store.unified_graph.scenario)
            except KragError as exc:
                return error(400, str(exc))
        cfg = state.config
        if body.get("strategy") or body.get("format"):
            try:
                cfg = KragConfig(
                    k=cfg.k,
                    alpha=cfg.alpha,
                    strategy=Strategy(body.get("strategy", cfg.strategy.value)),
                    w_text=cfg.w_text,
                    w_graph=cfg.w_graph,
                    render_format=body.get("format", cfg.render_format),
                    surface_disagreement=cfg.surface_disagreement,
                )
            except ValueError:
                return error(400, f"unknown strategy {body.get('strategy')!r}")
        try:
            result = answer_query(body["query"], state.store, state.index, state.generator, cfg, facts)
        except EmptyStoreError:
            return error(409, "knowledge store is empty")
        except (ExternalUnavailableError, ExternalTimeoutError) as exc:
            return error(502, str(exc))
        except KragError as exc:
            cause = getattr(exc, "cause", None)
            if isinstance(cause, EmptyStoreError):
                return error(409, "knowledge store is empty")
            if isinstance(cause, (ExternalUnavailableError, ExternalTimeoutError)):
                return error(502, str(cause))
            if isinstance(cause, UnknownFormatError):
                return error(400, str(cause))
            return error(400, str(exc))
        return JSONResponse(
            {
                "answer": result.answer,
                "explanation": explanation_to_dict(result.explanation),
                "graph_render": result.graph_render,
                "citations": list(result.citations),
                "disclaimer": result.disclaimer,
                "pattern_id": result.pattern_id,
                "trace": [{"stage": s, "ms": ms} for s, ms in result.trace],
                "verdicts": _verdicts_to_dict(result.verdicts),
                "unmatched": list(result.unmatched),
            }
        )

    async def create_session(request: Request) -> JSONResponse:
        try:
            body = await request.json()
        except Exception:
            return error(400, "request body must be a JSON object")
        if not isinstance(body, dict):
            return error(400, "request body must be a JSON object")
        pattern_id = body.get("pattern_id")
        if pattern_id is None and isinstance(body.get("query"), str) and body["query"].strip():
            if state.store.is_empty:
                return error(409, "knowledge store is empty")
            hits = retrieve(body["query"], state.index, state.config.k)
            point = select_pattern_graph(body["query"], hits, state.store, state.config)
            pattern_id = point.id
        if not isinstance(pattern_id, str) or pattern_id not in state.store.points:
            return error(404, f"unknown pattern {pattern_id!r}")
        session = state.new_session(pattern_id)
        payload = _session_payload(session, state.config.render_format)
        return JSONResponse(payload, status_code=201)

    def _get_session(sid: str) -> Session | None:
        with state.sessions_lock:
            return state.sessions.get(sid)

    async def get_session(request: Request) -> JSONResponse:
        session = _get_session(request.path_params["sid"])
        if session is None:
            return error(404, "unknown session")
        with session.lock:
            return JSONResponse(_session_payload(session, state.config.render_format))

    async def post_act(request: Request) -> JSONResponse:
        session = _get_session(request.path_params["sid"])
        if session is None:
            return error(404, "unknown session")
        try:
            body = await request.json()
        except Exception:
            return error(400, "request body must be a JSON object")
        if not isinstance(body, dict):
            return error(400, "request body must be a JSON object")
        try:
            kind = ActKind(body.get("act"))
        except ValueError:
            return error(400, f"unknown act {body.get('act')!r}")
        party_id = body.get("party")
        fact = body.get("fact")
        if not isinstance(party_id, str) or not isinstance(fact, str) or not fact.strip():
            return error(400, "fields 'party' and 'fact' are required")
        scenario = session.case.graph.scenario
        if scenario is None or scenario.party(party_id) is None:
            return error(422, f"unknown party {party_id!r}")
        if kind is ActKind.PLAUSIBLE and scenario.party(party_id).role is not Role.JUDGE:
            return error(422, f"plausible rulings are reserved to the judge, not {party_id!r}")
        note = body.get("note")
        if note is not None and not isinstance(note, str):
            return error(400, "field 'note' must be a string")
        try:
            act = Act(kind, party_id, canonicalize_label(fact), note)
        except EmptyLabelError as exc:
            return error(400, str(exc))
        with session.lock:
            _apply_act(session, act)
            assert session.verdicts is not None
            return JSONResponse(
                {
                    "verdicts": _verdicts_to_dict(session.verdicts),
                    "graph_render": render_graph(
                        session.case.graph, session.verdicts, state.config.render_format
                    ),
                    "revision": session.revision,
                    "unmatched": list(session.case.unmatched),
                }
            )

    async def get_graph(request: Request):
        session = _get_session(request.path_params["sid"])
        if session is None:
            return error(404, "unknown session")
        fmt = request.query_params.get("format", "dot")
        if fmt.strip().lower() not in FORMATS:
            return error(400, f"unknown format {fmt!r}")
        with session.lock:
            assert session.verdicts is not None
            return PlainTextResponse(render_graph(session.case.graph, session.verdicts, fmt))

    async def fork_session(request: Request) -> JSONResponse:
        session = _get_session(request.path_params["sid"])
        if session is None:
            return error(404, "unknown session")
        with session.lock:
            forked = state.new_session(session.pattern_id, list(session.acts))
        return JSONResponse(_session_payload(forked, state.config.render_format), status_code=201)

    async def delete_session(request: Request) -> HttpResponse:
        with state.sessions_lock:
            existed = state.sessions.pop(request.path_params["sid"], None)
        if existed is None:
            return error(404, "unknown session")
        return HttpResponse(status_code=204)

    routes = [
        Route("/healthz", healthz, methods=["GET"]),
        Route("/query", query, methods=["POST"]),
        Route("/sessions", create_session, methods=["POST"]),
        Route("/sessions/{sid}", get_session, methods=["GET"]),
        Route("/sessions/{sid}", delete_session, methods=["DELETE"]),
        Route("/sessions/{sid}/acts", post_act, methods=["POST"]),
        Route("/sessions/{sid}/graph", get_graph, methods=["GET"]),
        Route("/sessions/{sid}/fork", fork_session, methods=["POST"]),
    ]
    middleware = [
        Middleware(
            CORSMiddleware,
            allow_origins=list(cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )
    ]
    app = Starlette(routes=routes, middleware=middleware)
    app.state.krag = state
    return app


def serve(store: KnowledgeStore, host: str = "127.0.0.1", port: int = 8080) -> None:
    import uvicorn

    uvicorn.run(create_app(store), host=host, port=port, log_level="info")
