import json
import random
from collections import Counter

import pytest

from sketchprove.prompting import (
    Category,
    ExampleQuad,
    MissingFullProof,
    PoolFormatError,
    PoolTooSmall,
    PromptConfig,
    PromptMode,
    apply_mode,
    build_draft_prompt,
    build_sketch_prompt,
    infer_category,
    load_pool,
    select_examples,
)
from sketchprove.sketch import count_comments, count_gaps, parse_sketch


@pytest.mark.parametrize(
    "name,expected",
    [
        ("algebra_binomnegdiscrineq_10alt28asqp1", Category.ALGEBRA),
        ("mathd_numbertheory_551", Category.NUMBER_THEORY),
        ("imo_1959_p1", Category.UNKNOWN),
        ("algebra_numbertheory_mix", Category.UNKNOWN),
        ("", Category.UNKNOWN),
    ],
)
def test_infer_category(name, expected):
    assert infer_category(name) is expected


def test_pool_shape(pool):
    assert len(pool.quads) == 20
    assert len(pool.of_category(Category.ALGEBRA)) == 10
    assert len(pool.of_category(Category.NUMBER_THEORY)) == 10
    assert len(pool.of_category(Category.UNKNOWN)) == 20


def test_pool_validation_rejects_gapless_sketch(tmp_path):
    entry = {
        "id": "algebra_bad",
        "category": "algebra",
        "informal_statement": "s",
        "informal_proof": "p",
        "formal_statement": 'theorem algebra_bad:\n  shows "True"',
        "formal_sketch": 'theorem algebra_bad: shows "True"\nproof -\n  (* n *)\n  show ?thesis by auto\nqed\n',
    }
    path = tmp_path / "pool.json"
    path.write_text(json.dumps([entry]))
    with pytest.raises(PoolFormatError, match="no open gap"):
        load_pool(path)


def test_pool_validation_rejects_commentless_sketch(tmp_path):
    entry = {
        "id": "algebra_bad",
        "category": "algebra",
        "informal_statement": "s",
        "informal_proof": "p",
        "formal_statement": 'theorem algebra_bad:\n  shows "True"',
        "formal_sketch": 'theorem algebra_bad: shows "True"\nproof -\n  show ?thesis sledgehammer\nqed\n',
    }
    path = tmp_path / "pool.json"
    path.write_text(json.dumps([entry]))
    with pytest.raises(PoolFormatError, match="no in-line comment"):
        load_pool(path)


# -- selection -----------------------------------------------------------------


def test_selection_respects_category(pool):
    config = PromptConfig(k_examples=3)
    picked = select_examples(pool, "algebra_new", Category.ALGEBRA, config, random.Random(1))
    assert len(picked) == 3
    assert all(q.category is Category.ALGEBRA for q in picked)


def test_selection_excludes_the_problem_itself(pool):
    config = PromptConfig(k_examples=3)
    target = pool.quads[0].id
    for seed in range(200):
        picked = select_examples(pool, target, Category.ALGEBRA, config, random.Random(seed))
        assert all(q.id != target for q in picked)


def test_selection_unknown_category_uses_whole_pool(pool):
    config = PromptConfig(k_examples=3)
    seen = set()
    for seed in range(300):
        for q in select_examples(pool, "imo_x", Category.UNKNOWN, config, random.Random(seed)):
            seen.add(q.category)
    assert seen == {Category.ALGEBRA, Category.NUMBER_THEORY}


def test_selection_too_small_pool(pool):
    config = PromptConfig(k_examples=10)
    with pytest.raises(PoolTooSmall):
        # excluding the target leaves 9 algebra quads
        select_examples(pool, pool.of_category(Category.ALGEBRA)[0].id, Category.ALGEBRA, config, random.Random(0))


def test_selection_deterministic_per_seed(pool):
    config = PromptConfig(k_examples=3)
    a = select_examples(pool, "x", Category.ALGEBRA, config, random.Random(42))
    b = select_examples(pool, "x", Category.ALGEBRA, config, random.Random(42))
    assert [q.id for q in a] == [q.id for q in b]


def test_selection_frequencies_uniform(pool):
    """Inclusion frequency of each eligible quad must match uniform sampling
    without replacement (k/N = 3/10), checked against a chi-square bound."""
    config = PromptConfig(k_examples=3)
    trials = 1000
    counts = Counter()
    for seed in range(trials):
        for q in select_examples(pool, "algebra_unseen", Category.ALGEBRA, config, random.Random(seed)):
            counts[q.id] += 1
    eligible = pool.of_category(Category.ALGEBRA)
    assert len(eligible) == 10
    expected = trials * 3 / 10
    for quad in eligible:
        assert abs(counts[quad.id] / trials - 0.3) <= 0.05
    chi_square = sum((counts[q.id] - expected) ** 2 / expected for q in eligible)
    assert chi_square < 27.88  # df=9 critical value at alpha=0.001


# -- ablation modes ----------------------------------------------------------------


def test_apply_mode_full_is_identity(pool):
    quad = pool.quads[0]
    assert apply_mode(quad, PromptMode.FULL) is quad


def test_apply_mode_no_comments(pool):
    quad = pool.quads[0]
    out = apply_mode(quad, PromptMode.NO_COMMENTS)
    ast = parse_sketch(out.formal_sketch)
    assert count_comments(ast) == 0
    assert count_gaps(ast) == count_gaps(parse_sketch(quad.formal_sketch))
    assert out.informal_proof == quad.informal_proof


def test_apply_mode_no_informal_proof(pool):
    out = apply_mode(pool.quads[0], PromptMode.NO_INFORMAL_PROOF)
    assert out.informal_proof == ""
    assert count_comments(parse_sketch(out.formal_sketch)) == 0


def test_apply_mode_full_proof(pool):
    out = apply_mode(pool.quads[0], PromptMode.FULL_PROOF)
    assert count_gaps(parse_sketch(out.formal_sketch)) == 0


def test_apply_mode_full_proof_missing():
    quad = ExampleQuad(
        id="algebra_x",
        category=Category.ALGEBRA,
        informal_statement="s",
        informal_proof="p",
        formal_statement="t",
        formal_sketch="irrelevant",
        full_proof=None,
    )
    with pytest.raises(MissingFullProof):
        apply_mode(quad, PromptMode.FULL_PROOF)


def test_mode_soundness_over_whole_pool(pool):
    for quad in pool.quads:
        assert count_comments(parse_sketch(apply_mode(quad, PromptMode.NO_COMMENTS).formal_sketch)) == 0
        no_informal = apply_mode(quad, PromptMode.NO_INFORMAL_PROOF)
        assert no_informal.informal_proof == ""
        assert count_comments(parse_sketch(no_informal.formal_sketch)) == 0
        assert count_gaps(parse_sketch(apply_mode(quad, PromptMode.FULL_PROOF).formal_sketch)) == 0


# -- prompt assembly ----------------------------------------------------------------


class FakeProblem:
    informal_statement = "Show that one plus one is two."
    formal_statement = 'theorem onepone:\n  shows "1 + 1 = 2"'


def test_sketch_prompt_counts(pool):
    examples = list(pool.quads[:3])
    prompt = build_sketch_prompt(examples, FakeProblem(), "Add one to one.", PromptConfig())
    assert prompt.count("Informal Statement:") == 4
    assert prompt.count("Informal Proof:") == 4
    assert prompt.count("Formal Statement:") == 4
    assert prompt.count("Formal Proof Sketch:") == 4
    # three complete example sketches, then the target's open slot
    assert prompt.rstrip().endswith("Formal Proof Sketch:")
    for quad in examples:
        assert quad.formal_sketch.rstrip() in prompt


def test_sketch_prompt_no_informal_sections(pool):
    examples = [apply_mode(q, PromptMode.NO_INFORMAL_PROOF) for q in pool.quads[:3]]
    config = PromptConfig(mode=PromptMode.NO_INFORMAL_PROOF)
    prompt = build_sketch_prompt(examples, FakeProblem(), "ignored draft", config)
    assert prompt.count("Informal Proof:") == 0
    assert "ignored draft" not in prompt


def test_sketch_prompt_deterministic(pool):
    examples = list(pool.quads[3:6])
    first = build_sketch_prompt(examples, FakeProblem(), "d", PromptConfig())
    second = build_sketch_prompt(examples, FakeProblem(), "d", PromptConfig())
    assert first == second


def test_sketch_prompt_drops_whole_examples_when_over_budget(pool):
    examples = list(pool.quads[:3])
    unbounded = build_sketch_prompt(examples, FakeProblem(), "d", PromptConfig())
    config = PromptConfig(max_prompt_chars=len(unbounded) - 1)
    prompt = build_sketch_prompt(examples, FakeProblem(), "d", config)
    assert prompt.count("Formal Proof Sketch:") == 3  # dropped exactly one example
    assert examples[0].formal_sketch.rstrip() not in prompt
    assert examples[1].formal_sketch.rstrip() in prompt


def test_full_proof_mode_uses_complete_proof_header(pool):
    examples = [apply_mode(q, PromptMode.FULL_PROOF) for q in pool.quads[:3]]
    prompt = build_sketch_prompt(examples, FakeProblem(), "d", PromptConfig(mode=PromptMode.FULL_PROOF))
    assert prompt.count("Formal Proof:") == 4
    assert "Formal Proof Sketch:" not in prompt
    assert "sledgehammer" not in prompt


def test_draft_prompt_zero_shot():
    prompt = build_draft_prompt(FakeProblem())
    assert prompt == "Show that one plus one is two.\n\nProof:"


def test_draft_prompt_few_shot():
    prompt = build_draft_prompt(FakeProblem(), [("S1", "P1"), ("S2", "P2")])
    assert prompt.count("Proof:") == 3
    assert prompt.index("P1") < prompt.index("S2")
    assert prompt.rstrip().endswith("Proof:")
    assert build_draft_prompt(FakeProblem(), [("S1", "P1"), ("S2", "P2")]) == prompt


def test_prompt_config_validation():
    with pytest.raises(ValueError):
        PromptConfig(k_examples=0)
