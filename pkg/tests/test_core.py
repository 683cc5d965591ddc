import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mapact.core import (
    MAX_GLOBAL_RULES,
    Action,
    CognitiveMap,
    EnvMismatchError,
    EpisodeReport,
    GlobalKnowledge,
    Instruction,
    KnowledgeEntry,
    Observation,
    ParseError,
    Rule,
    StepRecord,
    Trajectory,
    canonical_text,
    canonicalize_observation,
    deserialize,
    map_diff_count,
    read_records,
    serialize,
    stable_hash64,
    whitespace_tokens,
    write_records,
)

INS = Instruction("put some apple on desk 1", "house", "house-pick_place-1", 1, "pick_place")


def entry(kind="spatial", subject="apple 1", relation="at", obj="desk 1", step=0):
    return KnowledgeEntry(kind, subject, relation, obj, step)


# canonicalization ------------------------------------------------------------


def test_canonicalize_example():
    text, key = canonicalize_observation("You see  a Cup 2.")
    assert text == "you see cup 2"
    assert key == stable_hash64("you see cup 2")


def test_canonicalize_empty():
    assert canonicalize_observation("") == ("", stable_hash64(""))


def test_whitespace_variants_share_key():
    assert canonicalize_observation("On the desk 1,  you see\ta pen 1.")[1] == canonicalize_observation(
        "On the desk 1, you see a pen 1."
    )[1]


def test_articles_removed_only_as_tokens():
    assert canonical_text("The theatre has an anteater") == "theatre has anteater"


def test_canonical_fixpoint_needs_repeat():
    # stripping the dot exposes a trailing article that must go too
    assert canonical_text("look at the .") == "look at"


@given(st.text(max_size=60))
def test_canonicalization_idempotent(text):
    once, key = canonicalize_observation(text)
    assert canonicalize_observation(once) == (once, key)


@given(st.text(max_size=40), st.text(max_size=40))
def test_equal_keys_iff_equal_canonical_text(a, b):
    ca, ka = canonicalize_observation(a)
    cb, kb = canonicalize_observation(b)
    assert (ca == cb) == (ka == kb)


def test_hash_is_stable_across_runs():
    # frozen blake2b-64 digest, independent of PYTHONHASHSEED
    assert stable_hash64("abc") == 0xD8BB14D833D59559


# domain types ----------------------------------------------------------------


def test_instruction_validation():
    with pytest.raises(ValueError):
        Instruction("  ", "house", "t", 0)
    with pytest.raises(ValueError):
        Instruction("x", "kitchen", "t", 0)
    with pytest.raises(ValueError):
        Instruction("x", "house", "t", 2**64)
    assert Instruction("x", "grid", "t", 2**64 - 1).seed == 2**64 - 1


def test_action_normalized():
    assert Action("  go   to\tdesk 1 ", "navigate").text == "go to desk 1"
    with pytest.raises(ValueError):
        Action("   ")
    with pytest.raises(ValueError):
        Action("look", "teleport")


def test_step_record_rejects_bad_stage_and_tokens():
    obs = Observation.make("ok", 1)
    with pytest.raises(ValueError):
        StepRecord(Action("look", "observe"), obs, "planning")
    with pytest.raises(ValueError):
        StepRecord(Action("look", "observe"), obs, "act", tokens_in=-1)


def test_trajectory_step_indices_increase():
    a = Action("look", "observe")
    s1 = StepRecord(a, Observation.make("x", 1), "act")
    s2 = StepRecord(a, Observation.make("y", 1), "act")
    with pytest.raises(ValueError):
        Trajectory("t", INS, (s1, s2))
    with pytest.raises(ValueError):
        Trajectory("t", INS, (s1,), Observation.make("start", 1))


def test_map_set_semantics():
    m = CognitiveMap("house", (entry(), entry(step=3), entry(obj="shelf 1")))
    assert m.entry_count == 2
    assert m.merged([entry()]).entry_count == 2
    assert m.merged([entry(kind="negative", subject="apple", relation="not_in", obj="fridge 1")]).entry_count == 3


def test_map_diff_count():
    prev = CognitiveMap("house", tuple(entry(obj=f"loc {i}") for i in range(5)))
    cur = prev.merged([entry(obj="loc 5"), entry(obj="loc 6")])
    assert map_diff_count(cur, prev) == 2
    assert map_diff_count(prev, prev) == 0
    with pytest.raises(EnvMismatchError):
        map_diff_count(CognitiveMap("grid"), prev)


def test_global_knowledge_cap():
    rules = tuple(Rule(f"rule {i}", (("t", i),)) for i in range(MAX_GLOBAL_RULES + 1))
    with pytest.raises(ValueError):
        GlobalKnowledge("house", action_syntax=rules)
    assert GlobalKnowledge("house", action_syntax=rules[:15]).rule_count == 15
    with pytest.raises(ValueError):
        Rule("no evidence", ())


def test_report_invariants():
    with pytest.raises(ValueError):
        EpisodeReport(INS, True, 0, 5, 0, 4)
    with pytest.raises(ValueError):
        EpisodeReport(INS, True, 0, 5, 0, 5, t_perturb=5)
    assert EpisodeReport(INS, True, 0, 5, 0, 5, t_perturb=4).perturbed


def test_whitespace_tokens():
    assert whitespace_tokens(" a  b\nc\t") == 3
    assert whitespace_tokens("") == 0


# serialization ---------------------------------------------------------------

names = st.text(st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=12)
entries = st.builds(
    KnowledgeEntry,
    st.sampled_from(["spatial", "affordance", "rule", "negative"]),
    names,
    names,
    names,
    st.integers(0, 100),
    st.sampled_from(["observed", "inferred"]),
)
instructions = st.builds(
    Instruction, names.filter(lambda s: s.strip()), st.sampled_from(["house", "craft", "grid"]), names, st.integers(0, 2**64 - 1)
)


@st.composite
def trajectories(draw):
    n = draw(st.integers(0, 8))
    steps = []
    for i in range(n):
        steps.append(
            StepRecord(
                Action(draw(names.filter(lambda s: s.split())), draw(st.sampled_from(["navigate", "interact", "observe", "noop"]))),
                Observation.make(draw(st.text(max_size=30)), i + 1, draw(st.booleans())),
                draw(st.sampled_from(["global_explore", "task_map", "act"])),
                draw(st.none() | st.text(max_size=20)),
                draw(st.integers(0, 500)),
                draw(st.integers(0, 500)),
            )
        )
    init = draw(st.none() | st.just(Observation.make("start", 0)))
    return Trajectory(draw(names), draw(instructions), tuple(steps), init, draw(st.none() | st.booleans()))


@given(st.lists(entries, max_size=10), st.sampled_from(["house", "craft", "grid"]))
def test_map_round_trip(es, env):
    m = CognitiveMap(env, tuple(es), "x/map")
    assert deserialize(serialize(m)) == m


@given(trajectories())
@settings(max_examples=60)
def test_trajectory_round_trip(t):
    assert deserialize(serialize(t)) == t


@given(instructions, st.booleans(), st.integers(0, 20), st.integers(0, 20), st.none() | st.booleans())
def test_report_round_trip(ins, ok, m, a, rex):
    r = EpisodeReport(ins, ok, m, a, m + a, a + 1, t_perturb=0, reexplored=rex, notes=("x",))
    assert deserialize(serialize(r)) == r


@given(st.lists(names, min_size=1, max_size=5, unique=True))
def test_knowledge_round_trip(statements):
    k = GlobalKnowledge("craft", error_patterns=tuple(Rule(s, (("t", i),)) for i, s in enumerate(statements)))
    assert deserialize(serialize(k)) == k


def test_empty_map_round_trip():
    assert deserialize(serialize(CognitiveMap("house"))) == CognitiveMap("house")


def test_fifty_step_trajectory_round_trip():
    steps = tuple(
        StepRecord(Action(f"go to loc {i}", "navigate"), Observation.make(f"You arrive at loc {i}.", i + 1), "act", f"t{i}", i, i)
        for i in range(50)
    )
    t = Trajectory("t", INS, steps, Observation.make("start", 0), True)
    back = deserialize(serialize(t))
    assert back == t and len(back) == 50


def test_truncated_stream_errors():
    steps = tuple(StepRecord(Action("look", "observe"), Observation.make("x", i + 1), "act") for i in range(3))
    data = serialize(Trajectory("t", INS, steps))
    for cut in (len(data) - 1, len(data) // 2, 10):
        with pytest.raises(ParseError):
            deserialize(data[:cut])


def test_parse_error_offsets():
    data = serialize(CognitiveMap("house", (entry(),)))
    with pytest.raises(ParseError) as e:
        deserialize(data[:-3])
    assert e.value.offset >= 0
    with pytest.raises(ParseError) as e:
        deserialize(b"")
    assert e.value.offset == 0
    good = serialize(EpisodeReport(INS, True, 0, 1, 0, 1))
    lines = good.split(b"\n")
    bad = lines[0] + b"\n" + b"{oops\n" + b"\n".join(lines[2:])
    with pytest.raises(ParseError) as e:
        deserialize(bad)
    assert e.value.offset == len(lines[0]) + 1 + 1


def test_version_checked():
    doc = json.loads(serialize(CognitiveMap("house")))
    doc["version"] = 99
    with pytest.raises(ParseError):
        deserialize(json.dumps(doc).encode())


def test_header_fields_stable_order():
    text = serialize(CognitiveMap("house", (entry(),))).decode()
    assert text.startswith('{"format":"mapact/cognitive_map","version":1,')


def test_records_files_round_trip(tmp_path):
    r = EpisodeReport(INS, True, 3, 4, 10, 4)
    t = Trajectory("t", INS, (StepRecord(Action("look", "observe"), Observation.make("x", 1), "act"),))
    p = tmp_path / "out.jsonl"
    write_records(p, [r, t])
    assert read_records(p) == [r, t]
