"""Chat-model backend speaking a plain message-list wire protocol.

Request:  {"model", "messages": [{"role", "content"}], "temperature", "max_tokens"}
Response: {"content", "usage": {"input_tokens", "output_tokens"}}

Transcripts are JSON lines of {"request", "response"} pairs. A recorded
transcript can be replayed offline, which is how the tests drive this module.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from typing import Optional

import httpx

from ..core import Action, CognitiveMap, Instruction, KnowledgeEntry, Rule, Trajectory
from .context import BackendConfig, BackendError, PolicyDecision, PromptContext, Role
from .parse import parse_action, parse_entry_lines, parse_thought
from .render import render_prompt

log = logging.getLogger(__name__)

API_KEY_ENV = "MAPACT_API_KEY"


class HttpTransport:
    def __init__(self, endpoint: str, timeout: float, retry_count: int):
        if not endpoint:
            raise BackendError("remote backend needs an endpoint")
        self.endpoint = endpoint
        self.timeout = timeout
        self.retry_count = retry_count

    def send(self, request: dict) -> dict:
        headers = {}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        last: Optional[Exception] = None
        for _ in range(self.retry_count + 1):
            try:
                r = httpx.post(self.endpoint, json=request, headers=headers, timeout=self.timeout)
                r.raise_for_status()
                return r.json()
            except (httpx.TimeoutException, httpx.TransportError) as exc:
                last = exc
                log.warning("request to %s failed: %s", self.endpoint, exc)
            except httpx.HTTPStatusError as exc:
                if exc.response.status_code < 500:
                    raise BackendError(f"backend rejected request: HTTP {exc.response.status_code}") from exc
                last = exc
        raise BackendError(f"backend unreachable after {self.retry_count + 1} attempts: {last}")


class ReplayTransport:
    """Serves responses from a transcript in order, checking each request."""

    def __init__(self, path: str, strict: bool = True):
        with open(path, encoding="utf-8") as fh:
            self.pairs = [json.loads(line) for line in fh if line.strip()]
        self.pos = 0
        self.strict = strict

    def send(self, request: dict) -> dict:
        if self.pos >= len(self.pairs):
            raise BackendError("transcript exhausted")
        pair = self.pairs[self.pos]
        self.pos += 1
        if self.strict and pair["request"]["messages"] != request["messages"]:
            raise BackendError(f"request {self.pos} differs from the transcript")
        return pair["response"]


class RecordingTransport:
    def __init__(self, inner, path: str):
        self.inner = inner
        self.path = path

    def send(self, request: dict) -> dict:
        response = self.inner.send(request)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"request": request, "response": response}, ensure_ascii=False) + "\n")
        return response


class RemoteClient:
    def __init__(self, config: BackendConfig, transport=None):
        self.config = config
        if transport is None:
            if config.transcript:
                transport = ReplayTransport(config.transcript)
            else:
                transport = HttpTransport(config.endpoint, config.timeout, config.retry_count)
            if config.record_to:
                transport = RecordingTransport(transport, config.record_to)
        self.transport = transport
        self.lock = threading.Lock()

    def complete(self, prompt: str) -> tuple[str, int, int]:
        request = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }
        with self.lock:
            resp = self.transport.send(request)
        try:
            content = str(resp["content"])
            usage = resp.get("usage") or {}
            return content, int(usage.get("input_tokens", 0)), int(usage.get("output_tokens", 0))
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"malformed response: {exc}") from exc


_clients: dict = {}
_clients_lock = threading.Lock()


def client_for(config: BackendConfig) -> RemoteClient:
    with _clients_lock:
        if config not in _clients:
            _clients[config] = RemoteClient(config)
        return _clients[config]


def reset_clients() -> None:
    with _clients_lock:
        _clients.clear()


def remote_decide(ctx: PromptContext, config: BackendConfig, handle=None) -> PolicyDecision:
    prompt = render_prompt(ctx)
    reply, t_in, t_out = client_for(config).complete(prompt)
    if ctx.role_template in (Role.FOCUS_ANALYZER.value, Role.REFLECTOR.value, Role.DISTILLER.value, Role.EXTRACTOR.value):
        return PolicyDecision(Action("think", "noop"), reply, (), t_in, t_out, ctx.role_template)
    admissible = None
    env = getattr(handle, "env", None)
    if env is not None:
        admissible = [a.text for a in env.admissible_actions()]
    cmd, ok = parse_action(reply, admissible)
    kind = env.action_kind(cmd) if env is not None else "noop"
    thought = parse_thought(reply)
    if not ok:
        thought = f"[unparseable reply] {thought or ''}".strip()
    return PolicyDecision(Action(cmd, kind), thought, (), t_in, t_out, ctx.role_template)


def extract_entries(config: BackendConfig, exploration: Trajectory, instruction: Instruction) -> list[KnowledgeEntry]:
    ctx = PromptContext(Role.EXTRACTOR.value, instruction, history=exploration.steps)
    reply, _, _ = client_for(config).complete(render_prompt(ctx))
    step = exploration.steps[-1].observation.step_index if exploration.steps else 0
    return [KnowledgeEntry(k, s, r, o, step, "inferred") for k, s, r, o in parse_entry_lines(reply)]


def extract_map(config: BackendConfig, exploration: Trajectory, instruction: Instruction) -> CognitiveMap:
    return CognitiveMap(instruction.env_id, tuple(extract_entries(config, exploration, instruction)), exploration.traj_id)


def distill_reply(config: BackendConfig, trajectories, instruction: Instruction) -> str:
    steps = tuple(s for t in trajectories for s in t.steps)
    ctx = PromptContext(Role.DISTILLER.value, instruction, history=steps)
    reply, _, _ = client_for(config).complete(render_prompt(ctx))
    return reply


def rule_evidence(statement: str, trajectories) -> tuple:
    """Steps whose action text appears in a model-written rule; first step when none does."""
    ev = []
    for t in trajectories:
        for s in t.steps:
            if s.action.text in statement:
                ev.append((t.traj_id, s.observation.step_index))
    if not ev and trajectories and trajectories[0].steps:
        ev.append((trajectories[0].traj_id, trajectories[0].steps[0].observation.step_index))
    return tuple(ev)


def rules_from_reply(reply_sections: dict, trajectories) -> dict[str, list[Rule]]:
    out = {}
    for name, statements in reply_sections.items():
        seen = []
        for st in statements:
            if st not in [r.statement for r in seen]:
                ev = rule_evidence(st, trajectories)
                if ev:
                    seen.append(Rule(st, ev))
        out[name] = seen
    return out
