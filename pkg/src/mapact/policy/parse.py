"""Turning free model text into one environment command."""

from __future__ import annotations

import logging
import re
from typing import Optional, Sequence

from ..core import normalize_ws

log = logging.getLogger(__name__)

FALLBACK_ACTION = "look"
_ACTION_LINE = re.compile(r"^\s*Action:\s*(.+?)\s*$", re.MULTILINE)
_THOUGHT_LINE = re.compile(r"^\s*Thought:\s*(.*?)\s*$", re.MULTILINE)


def parse_action(reply: str, admissible: Optional[Sequence[str]] = None) -> tuple[str, bool]:
    """Return ``(command, parsed_ok)``.

    Order: the first ``Action:`` line, else the earliest admissible command
    found as a substring (longest wins at equal position), else ``look``.
    """
    m = _ACTION_LINE.search(reply or "")
    if m:
        cmd = normalize_ws(m.group(1))
        if cmd:
            return cmd, True
    if admissible:
        best = None
        for a in admissible:
            pos = (reply or "").find(a)
            if pos >= 0:
                cand = (pos, -len(a), a)
                if best is None or cand < best:
                    best = cand
        if best is not None:
            return best[2], True
    log.warning("unparseable reply, falling back to %r: %.80r", FALLBACK_ACTION, reply)
    return FALLBACK_ACTION, False


def parse_thought(reply: str) -> Optional[str]:
    m = _THOUGHT_LINE.search(reply or "")
    return m.group(1) if m else None


def parse_entry_lines(reply: str) -> list[tuple[str, str, str, str]]:
    """``kind | subject | relation | object`` lines; anything else is skipped."""
    out = []
    for line in (reply or "").splitlines():
        parts = [p.strip() for p in line.strip().lstrip("-* ").split("|")]
        if len(parts) == 4 and parts[0] in ("spatial", "affordance", "rule", "negative") and all(parts):
            out.append(tuple(parts))
    return out


_SECTION = re.compile(r"^\s*(Action Syntax|Interaction Rules|Error Patterns)\s*:?\s*$", re.IGNORECASE)


def parse_rule_sections(reply: str) -> dict[str, list[str]]:
    sections = {"action_syntax": [], "interaction_rules": [], "error_patterns": []}
    current = None
    for line in (reply or "").splitlines():
        m = _SECTION.match(line)
        if m:
            current = m.group(1).lower().replace(" ", "_")
            continue
        s = line.strip()
        if current and s.startswith("- ") and s[2:].strip():
            sections[current].append(s[2:].strip())
    return sections


_FOCUS = re.compile(r"^\s*Focus Point\s+(\d+)\s*:\s*(.+)$", re.MULTILINE)
_REASON = re.compile(r"^\s*Reasoning\s+(\d+)\s*:\s*(.+)$", re.MULTILINE)


def parse_focus_points(reply: str) -> list[tuple[str, str]]:
    reasons = {int(n): t.strip() for n, t in _REASON.findall(reply or "")}
    return [(reasons.get(int(n), ""), t.strip()) for n, t in _FOCUS.findall(reply or "")]
