"""Prompt assembly from the role and environment template assets.

Every variable field is escaped so it occupies exactly one line, which keeps
the rendering injective: distinct contexts never produce the same text.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from ..core import GlobalKnowledge, whitespace_tokens
from .context import TEXT_ROLES, PolicyError, PromptContext

TEMPLATE_VERSION = 1
HISTORY_WINDOW = 20

_RESPONSE_ACTION = 'Respond with a line "Thought: <reasoning>" followed by a line "Action: <command>".'
_RESPONSE_TEXT = "Respond in plain text following the format above."


def escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\n", "\\n").replace("|", "\\|")


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    try:
        raw = resources.files("mapact.policy").joinpath("templates", f"{name}.txt").read_text(encoding="utf-8")
    except FileNotFoundError:
        raise PolicyError(f"no prompt template {name!r}") from None
    head, _, body = raw.partition("\n")
    if head.strip() != f"version: {TEMPLATE_VERSION}":
        raise PolicyError(f"template {name!r} has unsupported header {head!r}")
    return body.rstrip("\n")


def env_template_name(env_id: str) -> str:
    return f"env_{env_id}"


def knowledge_block(k: GlobalKnowledge) -> list[str]:
    lines = ["[Global Knowledge]"]
    n = 0
    for title, rules in (
        ("Action Syntax:", k.action_syntax),
        ("Interaction Rules:", k.interaction_rules),
        ("Error Patterns:", k.error_patterns),
    ):
        lines.append(title)
        for r in rules:
            n += 1
            ev = " | ".join(f"{escape(t)}@{s}" for t, s in r.evidence)
            lines.append(f"{n}. {escape(r.statement)} | {ev}")
    return lines


def map_line(e) -> str:
    return " | ".join(
        [e.kind, escape(e.subject), escape(e.relation), escape(e.object), str(e.source_step), e.confidence]
    )


def render_prompt(ctx: PromptContext) -> str:
    """Assemble the full prompt text for one policy call."""
    role_body = load_template(ctx.role_template)
    env_body = load_template(env_template_name(ctx.env_id))
    lines = [f"[Role: {ctx.role_template}]", role_body, "[Environment]", env_body, "[Task]", escape(ctx.instruction.text)]
    if ctx.focus_points is not None:
        lines.append("[Focus Points]")
        lines += [f"{i}. {escape(p)}" for i, p in enumerate(ctx.focus_points, 1)]
    k = ctx.shown_knowledge
    if k is not None:
        lines += knowledge_block(k)
    m = ctx.shown_map
    if m is not None:
        lines.append("[Cognitive Map]")
        lines += [map_line(e) for e in m.entries]
    lines.append("[History]")
    for rec in ctx.history:
        thought = "" if rec.thought is None else escape(rec.thought)
        lines.append(
            f"{rec.observation.step_index} | {rec.stage} | {thought} | {escape(rec.action.text)} | "
            f"{escape(rec.observation.text)} | {int(rec.observation.error_flag)}"
        )
    lines.append("[Response]")
    lines.append(_RESPONSE_TEXT if ctx.role_template in TEXT_ROLES else _RESPONSE_ACTION)
    return "\n".join(lines) + "\n"


def completion_text(thought, action_text: str) -> str:
    return f"Thought: {thought or ''}\nAction: {action_text}"


def prompt_tokens(ctx: PromptContext) -> int:
    return whitespace_tokens(render_prompt(ctx))
