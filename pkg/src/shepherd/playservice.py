"""Session server for human-co-player evaluation of redistribution mechanisms.

Hosts 4-seat resource-allocation sessions: after an optional no-stakes
tutorial round, each group plays a Uniform-mechanism phase followed by two
test mechanisms in counterbalanced order (seed parity), 10 rounds per
phase. Contributions are simultaneous: no response ever reveals another
seat's current-round contribution before the round resolves. Seats that
miss the round timeout are auto-filled with a uniform random contribution
and flagged so analysis can drop them.

Transport is a plain JSON request/response API (polling clients); every
error body carries a machine-readable ``code``. Each session's state
transitions are serialized by a per-session lock.
"""

import json
import secrets
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np

from . import checkpoints, games, policies
from .errors import ConfigError, ShepherdError

ROUNDS_PER_PHASE = 10
N_SEATS = 4
DEFAULT_ENDOWMENTS = (1.0, 0.5, 0.4, 0.3)
DEFAULT_TIMEOUT_SECONDS = 60.0


class SessionError(ShepherdError):
    def __init__(self, code: str, message: str, status: int = 400):
        super().__init__(message)
        self.code = code
        self.status = status


def resolve_mechanism_ref(ref: str):
    """A mechanism reference is a baseline name or a checkpoint path."""
    if ref in policies.BASELINE_KINDS:
        return policies.BaselineMechanism(ref)
    path = ref.split(":", 1)[1] if ref.startswith("checkpoint:") else ref
    try:
        ckpt = checkpoints.load(path)
    except ShepherdError as err:
        raise ConfigError(f"cannot resolve mechanism {ref!r}: {err}") from err
    if ckpt.policy["kind"] != "mechanism_net":
        raise ConfigError(f"checkpoint {path!r} does not hold a redistribution mechanism")
    net = policies.MechanismNet.from_flat(ckpt.mech_params())
    mech = policies.NetMechanism(net)
    mech.label = f"IO-Loop[{path}]"
    return mech


@dataclass
class Seat:
    index: int
    name: str
    token: str
    dropped: bool = False
    cumulative_return: float = 0.0


@dataclass
class Phase:
    label: str
    mechanism: object


@dataclass
class RoundRecord:
    phase_index: int  # -1 for the tutorial round
    phase_label: str
    mechanism: str
    round_no: int
    tutorial: bool
    contributions: list[float]
    autofill: list[bool]
    payouts: list[float]
    returns: list[float]
    pool: float
    welfare: float

    def to_json(self) -> dict:
        return {
            "type": "round",
            "phase_index": self.phase_index,
            "phase": self.phase_label,
            "mechanism": self.mechanism,
            "round": self.round_no,
            "tutorial": self.tutorial,
            "contributions": self.contributions,
            "autofill": self.autofill,
            "payouts": self.payouts,
            "returns": self.returns,
            "pool": self.pool,
            "welfare": self.welfare,
        }


class PlaySession:
    """One 4-seat session; all mutating access goes through ``self.lock``."""

    def __init__(
        self,
        mechanism_refs,
        endowments=DEFAULT_ENDOWMENTS,
        seed: int = 0,
        tutorial: bool = True,
        timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS,
        clock=time.monotonic,
    ):
        if len(mechanism_refs) != 2:
            raise ConfigError("a session schedules exactly two test mechanisms")
        endowments = tuple(float(x) for x in endowments)
        if len(endowments) != N_SEATS:
            raise ConfigError(f"sessions have exactly {N_SEATS} seats")
        self.spec = games.PggSpec(endowments=endowments)
        mechs = [resolve_mechanism_ref(ref) for ref in mechanism_refs]
        # counterbalanced order: odd seeds face the test mechanisms swapped
        if seed % 2 == 1:
            mechs = mechs[::-1]
            mechanism_refs = list(mechanism_refs)[::-1]
        self.phases = [Phase("Uniform", policies.BaselineMechanism("Uniform"))]
        self.phases += [Phase(m.label, m) for m in mechs]
        self.session_id = uuid.uuid4().hex
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.clock = clock
        self.timeout_seconds = timeout_seconds
        self.lock = threading.RLock()

        self.state = "lobby"
        self.tutorial_pending = bool(tutorial)
        self.phase_index = 0
        self.round_no = 1
        self.round_deadline: float | None = None
        self.seats: list[Seat] = []
        self.pending: dict[int, float] = {}
        self.history: list[RoundRecord] = []

    # -- lifecycle ---------------------------------------------------------

    @property
    def in_tutorial(self) -> bool:
        return self.state == "collecting" and self.tutorial_pending

    def current_phase(self) -> Phase:
        return self.phases[self.phase_index]

    def join(self, name: str) -> Seat:
        with self.lock:
            if self.state != "lobby":
                raise SessionError("session_full", "session already started", 409)
            if len(self.seats) >= N_SEATS:
                raise SessionError("session_full", "all seats are taken", 409)
            seat = Seat(index=len(self.seats), name=name, token=secrets.token_hex(16))
            self.seats.append(seat)
            if len(self.seats) == N_SEATS:
                self.state = "collecting"
                self._open_round()
            return seat

    def _open_round(self):
        self.pending = {}
        self.round_deadline = self.clock() + self.timeout_seconds

    def _seat_for(self, token: str) -> Seat:
        for seat in self.seats:
            if secrets.compare_digest(seat.token, token):
                return seat
        raise SessionError("bad_token", "unknown seat token", 401)

    # -- round resolution ----------------------------------------------------

    def _maybe_timeout(self):
        if self.state != "collecting" or self.round_deadline is None:
            return
        if self.clock() < self.round_deadline:
            return
        missing = [s for s in self.seats if s.index not in self.pending]
        for seat in missing:
            self.pending[seat.index] = float(self.rng.uniform(0.0, 1.0))
            seat.dropped = True
        self._resolve_round(autofilled={s.index for s in missing})

    def _resolve_round(self, autofilled=frozenset()):
        rho = np.array([self.pending[i] for i in range(N_SEATS)])
        mechanism = (
            policies.BaselineMechanism("Uniform")
            if self.tutorial_pending
            else self.current_phase().mechanism
        )
        payouts = np.asarray(
            mechanism.payouts(
                self.spec.endowment_array, self.spec.growth, rho, rng=self.rng
            )
        )
        outcome = games.pgg_round(self.spec, rho, payouts)
        record = RoundRecord(
            phase_index=-1 if self.tutorial_pending else self.phase_index,
            phase_label="Tutorial" if self.tutorial_pending else self.current_phase().label,
            mechanism=mechanism.label,
            round_no=0 if self.tutorial_pending else self.round_no,
            tutorial=self.tutorial_pending,
            contributions=[float(x) for x in rho],
            autofill=[i in autofilled for i in range(N_SEATS)],
            payouts=[float(x) for x in outcome.payouts],
            returns=[float(x) for x in outcome.participant_returns],
            pool=float(outcome.pool),
            welfare=float(outcome.mechanism_return),
        )
        self.history.append(record)
        if self.tutorial_pending:
            # no-stakes practice round: nothing accrues
            self.tutorial_pending = False
        else:
            for seat in self.seats:
                seat.cumulative_return += record.returns[seat.index]
            self._advance()
        if self.state == "collecting":
            self._open_round()

    def _advance(self):
        if self.round_no < ROUNDS_PER_PHASE:
            self.round_no += 1
            return
        if self.phase_index + 1 < len(self.phases):
            self.phase_index += 1
            self.round_no = 1
            return
        self.state = "finished"
        self.round_deadline = None

    def submit(self, token: str, contribution: float) -> dict:
        with self.lock:
            self._maybe_timeout()
            seat = self._seat_for(token)
            if self.state == "lobby":
                raise SessionError("not_started", "session has not started", 409)
            if self.state != "collecting":
                raise SessionError(
                    "wrong_state", f"session is {self.state}; no round is open", 409
                )
            if not isinstance(contribution, (int, float)) or not np.isfinite(contribution):
                raise SessionError("bad_contribution", "contribution must be a finite number")
            if not 0.0 <= contribution <= 1.0:
                raise SessionError(
                    "bad_contribution", "contribution must lie in [0, 1]"
                )
            if seat.index in self.pending:
                raise SessionError(
                    "duplicate_submission", "seat already contributed this round", 409
                )
            self.pending[seat.index] = float(contribution)
            seat.dropped = False
            resolved = False
            if len(self.pending) == N_SEATS:
                self._resolve_round()
                resolved = True
            ack = {"status": "resolved" if resolved else "waiting"}
            if resolved:
                ack["outcome"] = self.history[-1].to_json()
            return ack

    # -- views ----------------------------------------------------------------

    def view(self, token: str) -> dict:
        with self.lock:
            self._maybe_timeout()
            seat = self._seat_for(token)
            e = self.spec.endowment_array
            own_history = [
                {
                    "phase": rec.phase_label,
                    "round": rec.round_no,
                    "tutorial": rec.tutorial,
                    "contribution": rec.contributions[seat.index],
                    "autofill": rec.autofill[seat.index],
                    "payout": rec.payouts[seat.index],
                    "return": rec.returns[seat.index],
                }
                for rec in self.history
            ]
            remaining = None
            if self.state == "collecting" and self.round_deadline is not None:
                remaining = max(0.0, self.round_deadline - self.clock())
            return {
                "session_id": self.session_id,
                "state": self.state,
                "endowments": [float(x) for x in e],
                "phases": [p.label for p in self.phases],
                "phase_index": None if self.state == "lobby" else (
                    -1 if self.in_tutorial else self.phase_index
                ),
                "phase": None if self.state == "lobby" else (
                    "Tutorial" if self.in_tutorial else self.current_phase().label
                ),
                "tutorial": self.in_tutorial,
                "round": None if self.state != "collecting" else (
                    0 if self.in_tutorial else self.round_no
                ),
                "rounds_per_phase": ROUNDS_PER_PHASE,
                "deadline_seconds": remaining,
                "seats": [
                    {
                        "seat": s.index,
                        "name": s.name,
                        "submitted": s.index in self.pending,
                        "dropped": s.dropped,
                    }
                    for s in self.seats
                ],
                "own": {
                    "seat": seat.index,
                    "endowment": float(e[seat.index]),
                    "submitted": seat.index in self.pending,
                    "cumulative_return": seat.cumulative_return,
                    "history": own_history,
                },
                "outcomes": [rec.to_json() for rec in self.history],
            }

    def abort(self):
        with self.lock:
            if self.state == "finished":
                raise SessionError("wrong_state", "session already finished", 409)
            self.state = "aborted"
            self.round_deadline = None

    # -- export ----------------------------------------------------------------

    def log_records(self) -> list[dict]:
        with self.lock:
            if self.state not in ("finished", "aborted"):
                raise SessionError(
                    "session_active", "log available once finished or aborted", 409
                )
            records = [rec.to_json() for rec in self.history]
            per_phase = []
            for index, phase in enumerate(self.phases):
                welfares = [
                    rec.welfare
                    for rec in self.history
                    if not rec.tutorial and rec.phase_index == index
                ]
                if welfares:
                    per_phase.append(
                        {
                            "phase_index": index,
                            "mechanism": phase.label,
                            "mean_welfare": float(np.mean(welfares)),
                            "rounds": len(welfares),
                        }
                    )
            records.append(
                {
                    "type": "summary",
                    "session_id": self.session_id,
                    "aborted": self.state == "aborted",
                    "partial": self.state == "aborted",
                    "seed": self.seed,
                    "phases": [p.label for p in self.phases],
                    "endowments": [float(x) for x in self.spec.endowment_array],
                    "mean_welfare_per_mechanism": per_phase,
                    "cumulative_returns": [s.cumulative_return for s in self.seats],
                }
            )
            return records


class SessionStore:
    def __init__(self, clock=time.monotonic):
        self._sessions: dict[str, PlaySession] = {}
        self._lock = threading.Lock()
        self.clock = clock

    def create(self, **kwargs) -> PlaySession:
        session = PlaySession(clock=self.clock, **kwargs)
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> PlaySession:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise SessionError("unknown_session", f"no session {session_id!r}", 404)
        return session


# -- HTTP layer -------------------------------------------------------------------


def build_app(store: SessionStore | None = None, frontend_dir=None):
    from fastapi import FastAPI, Query, Request
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import JSONResponse, PlainTextResponse
    from pydantic import BaseModel, Field

    app = FastAPI(title="shepherd play service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store if store is not None else SessionStore()

    class CreateSessionBody(BaseModel):
        mechanisms: list[str] = Field(min_length=2, max_length=2)
        endowments: list[float] | None = None
        seed: int = 0
        tutorial: bool = True
        timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS

    class JoinBody(BaseModel):
        name: str = "anonymous"

    class ContributeBody(BaseModel):
        token: str
        contribution: float

    @app.exception_handler(SessionError)
    async def _session_error(request: Request, err: SessionError):
        return JSONResponse(
            status_code=err.status,
            content={"error": {"code": err.code, "message": str(err)}},
        )

    @app.exception_handler(ConfigError)
    async def _config_error(request: Request, err: ConfigError):
        return JSONResponse(
            status_code=400,
            content={"error": {"code": "bad_config", "message": str(err)}},
        )

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        session = app.state.store.create(
            mechanism_refs=body.mechanisms,
            endowments=body.endowments or DEFAULT_ENDOWMENTS,
            seed=body.seed,
            tutorial=body.tutorial,
            timeout_seconds=body.timeout_seconds,
        )
        return {
            "session_id": session.session_id,
            "phases": [p.label for p in session.phases],
            "tutorial": session.tutorial_pending,
            "endowments": [float(x) for x in session.spec.endowment_array],
        }

    @app.post("/sessions/{session_id}/join")
    def join(session_id: str, body: JoinBody):
        session = app.state.store.get(session_id)
        seat = session.join(body.name)
        return {"token": seat.token, "seat": seat.index, "session_id": session_id}

    @app.get("/sessions/{session_id}/state")
    def state(session_id: str, token: str = Query(...)):
        return app.state.store.get(session_id).view(token)

    @app.post("/sessions/{session_id}/contribute")
    def contribute(session_id: str, body: ContributeBody):
        return app.state.store.get(session_id).submit(body.token, body.contribution)

    @app.post("/sessions/{session_id}/abort")
    def abort(session_id: str):
        app.state.store.get(session_id).abort()
        return {"status": "aborted"}

    @app.get("/sessions/{session_id}/log")
    def log(session_id: str):
        records = app.state.store.get(session_id).log_records()
        text = "\n".join(json.dumps(rec, sort_keys=True) for rec in records) + "\n"
        return PlainTextResponse(text, media_type="application/x-ndjson")

    if frontend_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="webui")

    return app


def serve(host="127.0.0.1", port=8000, frontend_dir=None):
    import uvicorn

    uvicorn.run(build_app(frontend_dir=frontend_dir), host=host, port=port)
