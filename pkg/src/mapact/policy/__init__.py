"""Decision backends: scripted oracles and a remote chat-model client."""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

from ..core import whitespace_tokens
from .actors import ACTORS, MODES, make_actor
from .context import (
    BackendConfig,
    BackendError,
    EnvHandle,
    PolicyDecision,
    PolicyError,
    PromptContext,
    Role,
)
from .oracle import oracle_decide
from .parse import parse_action
from .render import HISTORY_WINDOW, completion_text, prompt_tokens, render_prompt
from .scout import oracle_explore_step

ORACLE = BackendConfig()


def decide(ctx: PromptContext, backend: Optional[BackendConfig] = None, handle: Optional[EnvHandle] = None) -> PolicyDecision:
    """One policy call.

    Oracle decisions are a pure function of the context and the handle. Their
    token counts are the whitespace tokens of the rendered prompt and of the
    "Thought/Action" completion the oracle would have written.
    """
    backend = backend or ORACLE
    if backend.kind == "remote":
        from .remote import remote_decide

        return remote_decide(ctx, backend, handle)
    d = oracle_decide(ctx, handle)
    t_out = whitespace_tokens(completion_text(d.thought, d.action.text))
    return replace(d, tokens_in=prompt_tokens(ctx), tokens_out=t_out)


__all__ = [
    "ACTORS",
    "MODES",
    "BackendConfig",
    "BackendError",
    "EnvHandle",
    "HISTORY_WINDOW",
    "ORACLE",
    "PolicyDecision",
    "PolicyError",
    "PromptContext",
    "Role",
    "decide",
    "make_actor",
    "oracle_explore_step",
    "parse_action",
    "render_prompt",
]
