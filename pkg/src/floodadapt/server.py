"""Session HTTP API: step planning years, preview what-ifs, compare
against a trained policy.

Each session wraps one environment instance.  Requests within a session
are serialized by a per-session lock, so a client can never interleave
two steps; different sessions run concurrently.  All payloads carry a
``version`` field, and every error response holds a machine-readable
``detail`` object with a ``code``, a human message, and any extras
(offending zones, valid ids).

Determinism contract: the environment draws exactly one rainfall event
per year from its seeded stream regardless of the actions taken, so two
sessions with the same seed see identical event sequences whatever their
plans, and the comparison rollout faces the same rainfall the human did.
What-if previews never touch the parent session's stream; they reseed a
cloned environment with a seed derived from (session seed, current year,
request nonce), which makes repeated previews within a year stable and
previews in different years independent.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .adaptation import CATALOG_NAMES, N_ACTIONS, default_catalog
from .climate import RcpScenario
from .env import EnvConfig, FloodAdaptEnv, StepInfo
from .errors import DomainError, ValidationError
from .policy import argmax_actions, forward, normalized_adjacency
from .worldio import World

PAYLOAD_VERSION = 1

COMPONENTS = ("I", "D", "C", "A", "M")


def _error(status: int, code: str, message: str, **extra) -> HTTPException:
    detail = {"code": code, "message": message}
    detail.update(extra)
    return HTTPException(status_code=status, detail=detail)


def preview_seed(session_seed: int, year: int, nonce: int) -> int:
    """Stable preview seed: same within a year and nonce, fresh otherwise."""
    text = f"{session_seed}/{year}/{nonce}".encode("utf-8")
    digest = hashlib.blake2b(text, digest_size=8).digest()
    return int.from_bytes(digest, "big") & 0x7FFFFFFF


def state_hash(snapshot: dict) -> str:
    """Digest of an environment snapshot, rng stream included."""
    rng = json.dumps(snapshot["rng"], sort_keys=True, default=int)
    parts = [str(snapshot["year"]), str(snapshot["t"]),
             str(int(snapshot["done"])), repr(snapshot["ledger"]), rng,
             np.asarray(snapshot["state"]).tobytes().hex()]
    return hashlib.sha256("|".join(parts).encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# request bodies


class CreateSessionRequest(BaseModel):
    world: str
    scenario: str | None = None
    seed: int = 0
    gamma: float = 0.99


class StepRequest(BaseModel):
    actions: list[int]


class WhatifRequest(BaseModel):
    actions: list[int]
    horizon: int = 0
    usePolicy: bool = False
    nonce: int = 0


# --------------------------------------------------------------------------
# sessions


@dataclass
class Session:
    id: str
    world_name: str
    world: World
    env: FloodAdaptEnv
    seed: int
    scenario: RcpScenario
    gamma: float
    policy: dict | None
    adj: np.ndarray | None
    lock: threading.Lock = field(default_factory=threading.Lock)
    history: list = field(default_factory=list)


def _catalog_payload(catalog) -> list[dict]:
    return [{
        "id": int(measure),
        "name": CATALOG_NAMES[measure],
        "effectKind": spec.effect_kind,
        "effectMagnitude": spec.effect_magnitude,
        "applicationRule": spec.application_rule,
        "implCost_dkk": spec.impl_cost_dkk,
        "maintCost_dkk_per_year": spec.maint_cost_dkk_per_year,
        "lifetime_years": spec.lifetime_years,
    } for measure, spec in sorted(catalog.items())]


def _masks_payload(masks: np.ndarray) -> list[list[bool]]:
    return [[bool(v) for v in row] for row in masks]


def _info_payload(info: StepInfo, reward_dkk: float, reward: float,
                  done: bool, actions) -> dict:
    totals = info.totals
    return {
        "year": info.year,
        "actions": [int(a) for a in actions],
        "rain_mm": float(info.rain_mm),
        "components": {k: totals[k] for k in COMPONENTS},
        "perZone": {
            "I": info.I_dkk.tolist(),
            "D": info.D_dkk.tolist(),
            "C": info.C_dkk.tolist(),
            "A": info.A_dkk.tolist(),
            "M": info.M_dkk.tolist(),
            "z": info.z.tolist(),
        },
        "outflow_m3": float(info.outflow_m3),
        "stored_m3": float(info.stored_m3),
        "cancelledTrips": int(info.cancelled_trips),
        "delayedTrips": int(info.delayed_trips),
        "reward_dkk": float(reward_dkk),
        "reward": float(reward),
        "done": bool(done),
    }


def _cumulative(rows: list[dict]) -> dict:
    out = {k: float(sum(r["components"][k] for r in rows))
           for k in COMPONENTS}
    out["cost_dkk"] = float(sum(out[k] for k in COMPONENTS))
    return out


def _deployments_payload(snapshot: dict) -> list[dict]:
    """Active measures with their expiry years, for mask tooltips."""
    rows = [
        {
            "zone": int(dep.zone),
            "measure": int(dep.measure),
            "name": CATALOG_NAMES[dep.measure],
            "deployYear": int(dep.deploy_year),
            "lifetimeYears": int(dep.lifetime_years),
            "activeThrough": int(dep.deploy_year + dep.lifetime_years),
        }
        for dep in snapshot["ledger"]
    ]
    return sorted(rows, key=lambda d: (d["zone"], d["measure"]))


def _session_payload(session: Session) -> dict:
    env = session.env
    snapshot = env.get_state()
    return {
        "version": PAYLOAD_VERSION,
        "sessionId": session.id,
        "world": session.world_name,
        "scenario": session.scenario.name.lower(),
        "seed": session.seed,
        "gamma": session.gamma,
        "year": env.year,
        "startYear": env.start_year,
        "endYear": env.end_year,
        "elapsedYears": env.t,
        "done": env.done,
        "zones": env.n_zones,
        "zoneGraph": {"zones": env.graph.n_zones,
                      "edges": [[int(a), int(b)] for a, b in env.graph.edges]},
        "masks": _masks_payload(env.current_masks()),
        "inventoryMask": _masks_payload(env.inventory_mask),
        "catalog": _catalog_payload(session.world.catalog),
        "deployments": _deployments_payload(snapshot),
        "policyAttached": session.policy is not None,
        "state": np.asarray(snapshot["state"]).tolist(),
        "stateHash": state_hash(snapshot),
        "cumulative": _cumulative(session.history),
        "history": list(session.history),
    }


# --------------------------------------------------------------------------
# application factory


def create_app(worlds: dict[str, World],
               policies: dict | None = None) -> FastAPI:
    """Build the API over a registry of worlds and optional per-world
    trained parameters."""
    app = FastAPI(title="flood adaptation sessions")
    # the browser explorer is served from a different origin (a static file
    # server); the API carries no credentials, so a blanket allowance is fine
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    registry = dict(worlds)
    policy_map = dict(policies or {})
    sessions: dict[str, Session] = {}
    sessions_lock = threading.Lock()

    def get_session(session_id: str) -> Session:
        with sessions_lock:
            session = sessions.get(session_id)
        if session is None:
            raise _error(404, "unknown-session",
                         f"no session {session_id!r}")
        return session

    def validated_actions(env: FloodAdaptEnv, actions) -> np.ndarray:
        arr = np.asarray(actions)
        if arr.shape != (env.n_zones,):
            raise _error(400, "invalid-actions",
                         f"expected one action per zone "
                         f"({env.n_zones} total), got {list(arr.shape)}")
        if arr.size and (not np.issubdtype(arr.dtype, np.integer)
                         or arr.min() < 0 or arr.max() >= N_ACTIONS):
            raise _error(400, "invalid-actions",
                         f"actions must be integers in [0, {N_ACTIONS})")
        masks = env.current_masks()
        offending = [int(z) for z in range(env.n_zones)
                     if not masks[z, arr[z]]]
        if offending:
            raise _error(409, "masked-action",
                         f"masked action in zones {offending}",
                         zones=offending)
        return arr.astype(np.int64)

    def policy_actions(session: Session, state, masks) -> np.ndarray:
        dist, _ = forward(session.policy, session.adj, state, masks)
        return argmax_actions(dist)

    @app.get("/worlds")
    def list_worlds():
        return {
            "version": PAYLOAD_VERSION,
            "worlds": [{
                "name": name,
                "zones": world.n_zones,
                "startYear": world.start_year,
                "endYear": world.end_year,
                "defaultScenario": world.default_scenario.name.lower(),
                "scenarios": [s.name.lower() for s in RcpScenario],
                "policyAttached": name in policy_map,
            } for name, world in sorted(registry.items())],
        }

    @app.get("/catalog")
    def get_catalog(world: str | None = None):
        if world is None:
            catalog = default_catalog()
        elif world in registry:
            catalog = registry[world].catalog
        else:
            raise _error(404, "unknown-world", f"unknown world {world!r}",
                         worlds=sorted(registry))
        return {"version": PAYLOAD_VERSION,
                "measures": _catalog_payload(catalog)}

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        if req.world not in registry:
            raise _error(404, "unknown-world",
                         f"unknown world {req.world!r}",
                         worlds=sorted(registry))
        world = registry[req.world]
        if req.scenario is None:
            scenario = world.default_scenario
        else:
            try:
                scenario = RcpScenario.parse(req.scenario)
            except DomainError as exc:
                raise _error(404, "unknown-scenario", str(exc),
                             scenarios=[s.name.lower() for s in RcpScenario])
        try:
            env = FloodAdaptEnv(world, EnvConfig(scenario=scenario,
                                                 seed=req.seed,
                                                 gamma=req.gamma))
        except ValidationError as exc:
            raise _error(400, "invalid-config", str(exc))
        env.reset()
        policy = policy_map.get(req.world)
        session = Session(
            id=uuid.uuid4().hex[:16],
            world_name=req.world,
            world=world,
            env=env,
            seed=req.seed,
            scenario=scenario,
            gamma=req.gamma,
            policy=policy,
            adj=normalized_adjacency(env.graph) if policy is not None
                else None,
        )
        with sessions_lock:
            sessions[session.id] = session
        return _session_payload(session)

    @app.get("/sessions/{session_id}")
    def get_session_state(session_id: str):
        session = get_session(session_id)
        with session.lock:
            return _session_payload(session)

    @app.post("/sessions/{session_id}/step")
    def step_session(session_id: str, req: StepRequest):
        session = get_session(session_id)
        with session.lock:
            env = session.env
            if env.done:
                raise _error(409, "horizon-exhausted",
                             f"the final year {env.end_year} is already "
                             "simulated; no further steps")
            acts = validated_actions(env, req.actions)
            result = env.step(acts)
            row = _info_payload(result.info, result.reward_dkk,
                                result.reward, result.done, acts)
            session.history.append(row)
            payload = {"version": PAYLOAD_VERSION, "sessionId": session.id}
            payload.update(row)
            payload["state"] = result.state.tolist()
            payload["masks"] = _masks_payload(result.masks)
            payload["stateHash"] = state_hash(env.get_state())
            payload["cumulative"] = _cumulative(session.history)
            return payload

    @app.post("/sessions/{session_id}/whatif")
    def whatif(session_id: str, req: WhatifRequest):
        session = get_session(session_id)
        with session.lock:
            env = session.env
            if env.done:
                raise _error(409, "horizon-exhausted",
                             "the episode is over; nothing left to preview")
            if req.horizon < 0:
                raise _error(400, "invalid-horizon",
                             "horizon must be nonnegative")
            if req.usePolicy and session.policy is None:
                raise _error(409, "no-policy",
                             "no policy attached to this session's world")
            acts = validated_actions(env, req.actions)
            remaining_after = env.end_year - env.year
            horizon = min(req.horizon, remaining_after)
            clamped = horizon < req.horizon

            snapshot = env.get_state()
            parent_before = state_hash(snapshot)
            seed = preview_seed(session.seed, env.year, req.nonce)
            snapshot["rng"] = np.random.default_rng(seed).bit_generator.state
            clone = FloodAdaptEnv(session.world, env.config)
            clone.set_state(snapshot)

            result = clone.step(acts)
            rows = [_info_payload(result.info, result.reward_dkk,
                                  result.reward, result.done, acts)]
            state, masks = result.state, result.masks
            for _ in range(horizon):
                if clone.done:
                    break
                if req.usePolicy:
                    nxt = policy_actions(session, state, masks)
                else:
                    nxt = np.zeros(env.n_zones, dtype=np.int64)
                result = clone.step(nxt)
                rows.append(_info_payload(result.info, result.reward_dkk,
                                          result.reward, result.done, nxt))
                state, masks = result.state, result.masks

            if state_hash(env.get_state()) != parent_before:
                raise _error(500, "isolation-violated",
                             "preview mutated the parent session")
            return {
                "version": PAYLOAD_VERSION,
                "sessionId": session.id,
                "candidate": [int(a) for a in acts],
                "requestedHorizon": req.horizon,
                "horizon": horizon,
                "clamped": clamped,
                "usePolicy": bool(req.usePolicy),
                "previewSeed": seed,
                "years": rows,
                "totals": _cumulative(rows),
                "totalReward_dkk": float(sum(r["reward_dkk"] for r in rows)),
                "parentStateHash": parent_before,
            }

    @app.get("/sessions/{session_id}/compare")
    def compare(session_id: str):
        session = get_session(session_id)
        with session.lock:
            if session.policy is None:
                raise _error(409, "no-policy",
                             "no policy attached to this session's world")
            elapsed = session.env.t
            rollout_env = FloodAdaptEnv(session.world, session.env.config)
            state, masks = rollout_env.reset()
            policy_rows = []
            for _ in range(elapsed):
                acts = policy_actions(session, state, masks)
                result = rollout_env.step(acts)
                policy_rows.append(_info_payload(
                    result.info, result.reward_dkk, result.reward,
                    result.done, acts))
                state, masks = result.state, result.masks
            human_rows = list(session.history)
            return {
                "version": PAYLOAD_VERSION,
                "sessionId": session.id,
                "years": elapsed,
                "human": {"series": human_rows,
                          "cumulative": _cumulative(human_rows)},
                "policy": {"series": policy_rows,
                           "cumulative": _cumulative(policy_rows)},
            }

    return app
