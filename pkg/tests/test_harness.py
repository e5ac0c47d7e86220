import json
from fractions import Fraction

import pytest

from conftest import FIXTURES
from sketchprove.harness import (
    AttemptRecord,
    CoverageError,
    Curve,
    DuplicateId,
    FailureStage,
    MissingResults,
    Problem,
    ProblemResult,
    SchemaError,
    Split,
    budget_grid,
    config_hash,
    cumulative_curve,
    export_curve_csv,
    export_records,
    export_table_csv,
    format_rate,
    import_attempts,
    import_records,
    load_dataset,
    save_dataset,
    success_rate,
    write_manifest,
)
from sketchprove.prompting import Category


def _attempt(pid, draft, sketch, success, stage=None, seed=0):
    return AttemptRecord(
        problem_id=pid,
        draft_index=draft,
        sketch_index=sketch,
        parse_ok=success,
        gaps_total=1 if success else 0,
        gaps_closed=1 if success else 0,
        success=success,
        failure_stage=None if success else (stage or FailureStage.PROVE),
        wall_ms=0,
        prompt_seed=seed,
    )


def _result(pid, outcomes):
    attempts = [
        _attempt(pid, i // 2, i % 2, ok) for i, ok in enumerate(outcomes)
    ]
    return ProblemResult.from_attempts(pid, attempts)


# -- dataset ------------------------------------------------------------------


def test_mini_corpus_loads(problems):
    assert len(problems) == 20
    assert sum(1 for p in problems if p.split is Split.VALID) == 10
    assert sum(1 for p in problems if p.split is Split.TEST) == 10
    categories = {p.category for p in problems}
    assert categories == {Category.ALGEBRA, Category.NUMBER_THEORY, Category.UNKNOWN}


def test_dataset_missing_field_rejected(tmp_path):
    lines = [
        json.dumps({"schema_version": "problems/1"}),
        json.dumps({"id": "p1", "split": "valid", "category": "algebra",
                    "informal_statement": "s", "informal_proof": "p"}),
    ]
    path = tmp_path / "bad.jsonl"
    path.write_text("\n".join(lines))
    with pytest.raises(SchemaError) as exc:
        load_dataset(path)
    assert exc.value.field_name == "formal_statement"
    assert exc.value.line == 2


def test_dataset_duplicate_id_rejected(tmp_path):
    record = {"id": "p1", "split": "valid", "category": "algebra",
              "informal_statement": "s", "informal_proof": "p", "formal_statement": "t"}
    path = tmp_path / "dup.jsonl"
    path.write_text("\n".join([json.dumps({"schema_version": "problems/1"}),
                               json.dumps(record), json.dumps(record)]))
    with pytest.raises(DuplicateId):
        load_dataset(path)


def test_dataset_round_trip(tmp_path, problems):
    path = tmp_path / "copy.jsonl"
    save_dataset(problems, path)
    assert load_dataset(path) == problems


def test_dataset_header_required(tmp_path):
    path = tmp_path / "nohdr.jsonl"
    path.write_text(json.dumps({"id": "p1"}))
    with pytest.raises(SchemaError):
        load_dataset(path)


# -- rates --------------------------------------------------------------------


def _mini_problems(n_valid, n_test):
    problems = []
    for i in range(n_valid):
        problems.append(Problem(f"v{i}", Split.VALID, Category.UNKNOWN, "s", None, "t"))
    for i in range(n_test):
        problems.append(Problem(f"t{i}", Split.TEST, Category.UNKNOWN, "s", None, "t"))
    return problems


def test_success_rate_zero_and_one():
    problems = _mini_problems(10, 0)
    losing = [_result(p.id, [False]) for p in problems]
    assert success_rate(losing, problems, Split.VALID) == Fraction(0)
    winning = [_result(p.id, [True]) for p in problems]
    assert success_rate(winning, problems, Split.VALID) == Fraction(1)


def test_success_rate_exact_fraction():
    problems = _mini_problems(3, 0)
    results = [_result("v0", [True]), _result("v1", [False]), _result("v2", [False])]
    rate = success_rate(results, problems, Split.VALID)
    assert rate == Fraction(1, 3)
    assert format_rate(rate) == "33.3%"


def test_success_rate_missing_results():
    problems = _mini_problems(2, 0)
    with pytest.raises(MissingResults) as exc:
        success_rate([_result("v0", [True])], problems, Split.VALID)
    assert exc.value.problem_ids == ("v1",)


def test_golden_rates_match_hand_count(problems):
    results = import_records(FIXTURES / "golden" / "records.jsonl")
    assert success_rate(results, problems, Split.VALID) == Fraction(8, 10)
    assert success_rate(results, problems, Split.TEST) == Fraction(7, 10)


# -- curves --------------------------------------------------------------------


def test_curve_immediate_success():
    results = [_result("p", [True, False, False, False, False])]
    assert cumulative_curve(results, 5).points == (1, 1, 1, 1, 1)


def test_curve_no_successes():
    results = [_result("p", [False] * 5)]
    assert cumulative_curve(results, 5).points == (0, 0, 0, 0, 0)


def test_curve_bounded_and_monotone(problems):
    results = import_records(FIXTURES / "golden" / "records.jsonl")
    curve = cumulative_curve(results, 10)
    assert all(b >= a for a, b in zip(curve.points, curve.points[1:]))
    assert curve.points[-1] <= len(problems)


def test_curve_matches_brute_force_recount():
    results = import_records(FIXTURES / "golden" / "records.jsonl")
    curve = cumulative_curve(results, 10)
    raw = import_attempts(FIXTURES / "golden" / "records.jsonl")
    by_problem: dict[str, list] = {}
    for record in raw:
        by_problem.setdefault(record.problem_id, []).append(record)
    for k in range(1, 11):
        solved = 0
        for records in by_problem.values():
            ordered = sorted(records, key=lambda r: (r.draft_index, r.sketch_index))
            solved += any(r.success for r in ordered[:k])
        assert curve.points[k - 1] == solved


def test_per_split_curve(problems):
    results = import_records(FIXTURES / "golden" / "records.jsonl")
    valid = cumulative_curve(results, 10, problems, Split.VALID)
    test = cumulative_curve(results, 10, problems, Split.TEST)
    combined = cumulative_curve(results, 10)
    assert [v + t for v, t in zip(valid.points, test.points)] == list(combined.points)


def test_curve_type_rejects_decreasing():
    with pytest.raises(ValueError):
        Curve((3, 2, 1))


# -- budget grid ------------------------------------------------------------------


def test_grid_corner_equals_total_solved():
    attempts = import_attempts(FIXTURES / "golden" / "records.jsonl")
    results = import_records(FIXTURES / "golden" / "records.jsonl")
    grid = budget_grid(attempts, [1, 2, 3, 4, 5], [1, 2], budget_cap=100)
    total_solved = sum(1 for r in results if r.solved)
    assert grid[-1][-1] == total_solved


def test_grid_first_cell_counts_first_attempt_successes():
    attempts = import_attempts(FIXTURES / "golden" / "records.jsonl")
    grid = budget_grid(attempts, [1], [1], budget_cap=100)
    firsts = sum(
        1 for a in attempts if a.draft_index == 0 and a.sketch_index == 0 and a.success
    )
    assert grid[0][0] == firsts


def test_grid_monotone_both_axes():
    attempts = import_attempts(FIXTURES / "golden" / "records.jsonl")
    drafts, sketches = [1, 2, 3, 4, 5], [1, 2]
    grid = budget_grid(attempts, drafts, sketches, budget_cap=100)
    for i in range(len(drafts)):
        for j in range(len(sketches)):
            if i + 1 < len(drafts):
                assert grid[i + 1][j] >= grid[i][j]
            if j + 1 < len(sketches):
                assert grid[i][j + 1] >= grid[i][j]


def test_grid_budget_cap_masks_cells():
    attempts = import_attempts(FIXTURES / "golden" / "records.jsonl")
    grid = budget_grid(attempts, [1, 5], [1, 2], budget_cap=5)
    assert grid[1][1] is None  # 5 x 2 = 10 > 5
    assert grid[1][0] is not None


def test_grid_coverage_error_on_truncated_cache():
    attempts = [a for a in import_attempts(FIXTURES / "golden" / "records.jsonl")
                if not (a.problem_id == "algebra_g01" and a.draft_index == 4)]
    with pytest.raises(CoverageError, match="algebra_g01"):
        budget_grid(attempts, [1, 2, 3, 4, 5], [1, 2], budget_cap=100)


def test_grid_rejects_early_stopped_records():
    attempts = [
        _attempt("p", 0, 0, True),
        AttemptRecord("p", 0, 1, False, 0, 0, False, FailureStage.NOT_RUN, 0, 0),
    ]
    with pytest.raises(CoverageError, match="early-stopped"):
        budget_grid(attempts, [1], [1, 2], budget_cap=10)


# -- record invariants ---------------------------------------------------------------


def test_attempt_record_invariants():
    with pytest.raises(ValueError):
        AttemptRecord("p", 0, 0, False, 1, 2, False, FailureStage.PROVE, 0, 0)  # closed > total
    with pytest.raises(ValueError):
        AttemptRecord("p", 0, 0, False, 1, 1, True, None, 0, 0)  # success without parse
    with pytest.raises(ValueError):
        AttemptRecord("p", 0, 0, True, 1, 1, True, FailureStage.PROVE, 0, 0)  # success with stage
    with pytest.raises(ValueError):
        AttemptRecord("p", 0, 0, True, 1, 0, False, None, 0, 0)  # failure without stage


def test_problem_result_invariants():
    good = _attempt("p", 0, 0, True)
    bad = _attempt("p", 0, 1, False)
    with pytest.raises(ValueError):
        ProblemResult("p", (good, bad), solved=False, first_success_index=None)
    with pytest.raises(ValueError):
        ProblemResult("p", (bad, good), solved=True, first_success_index=0)


# -- export / import -------------------------------------------------------------------


def test_records_round_trip(tmp_path):
    results = [_result("p1", [False, True, False]), _result("p2", [False] * 3)]
    path = tmp_path / "records.jsonl"
    export_records(results, path)
    assert import_records(path) == results


def test_records_export_is_byte_stable(tmp_path):
    results = import_records(FIXTURES / "golden" / "records.jsonl")
    out = tmp_path / "again.jsonl"
    export_records(results, out)
    assert out.read_bytes() == (FIXTURES / "golden" / "records.jsonl").read_bytes()


def test_curve_csv_row_count(tmp_path):
    path = tmp_path / "curve.csv"
    export_curve_csv(Curve((1, 2, 2)), path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "attempts,problems_solved"
    assert len(lines) == 4


def test_table_csv(tmp_path, problems):
    results = import_records(FIXTURES / "golden" / "records.jsonl")
    path = tmp_path / "table.csv"
    export_table_csv(results, problems, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "split,solved,total,fraction,percent"
    assert lines[1] == "valid,8,10,8/10,80.0%"
    assert lines[2] == "test,7,10,7/10,70.0%"


def test_manifest_excludes_timestamps_from_config_hash(tmp_path):
    config = {"seed": 7, "jobs": 2}
    write_manifest(tmp_path / "m1.json", config, created_at="2026-01-01T00:00:00Z")
    write_manifest(tmp_path / "m2.json", config, created_at="2026-02-02T00:00:00Z")
    m1 = json.loads((tmp_path / "m1.json").read_text())
    m2 = json.loads((tmp_path / "m2.json").read_text())
    assert m1["config_hash"] == m2["config_hash"] == config_hash(config)
    assert m1["created_at"] != m2["created_at"]
