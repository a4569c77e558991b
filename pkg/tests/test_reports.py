from __future__ import annotations

import math

import pytest

from geolm.bench.items import BadItem, HumanEvalRecord, ObjectiveItem, SubjectiveItem, load_benchmark, write_benchmark
from geolm.bench.reports import DuplicateStep, ablation_matrix, checkpoint_curve, evaluate
from geolm.model.tokenizer import VOCAB_SIZE


class FavoringScorer:
    """Always favors a fixed label; generates a canned answer."""

    def __init__(self, favorite: str, scorer_id: str = "favoring"):
        self.favorite = favorite
        self.scorer_id = scorer_id

    def token_logprobs(self, text, continuation=None):
        if continuation is None:
            return [-1.0]
        return [-0.1 if continuation == self.favorite else -4.0]

    def generate(self, prompt, max_new=64, **kwargs):
        return "a generated answer"


def _items(n: int, answer: str = "A") -> list[ObjectiveItem]:
    out = []
    for i in range(n):
        out.append(
            ObjectiveItem(
                id=f"q{i}",
                question=f"Question {i}?",
                choices={"A": "one", "B": "two", "C": "three", "D": "four"},
                answer=answer,
                subset="npee" if i % 2 == 0 else "aptest",
            )
        )
    return out


def test_objective_item_invariants() -> None:
    with pytest.raises(BadItem):
        ObjectiveItem(id="x", question="q", choices={"A": "a"}, answer="A")
    with pytest.raises(BadItem):
        ObjectiveItem(id="x", question="q", choices={"B": "b", "C": "c"}, answer="B")
    with pytest.raises(BadItem):
        ObjectiveItem(id="x", question="q", choices={"A": "a", "B": "b"}, answer="E")


def test_subjective_item_invariants() -> None:
    with pytest.raises(BadItem):
        SubjectiveItem(id="s", question="", reference_answer="r")
    with pytest.raises(BadItem):
        SubjectiveItem(id="s", question="q", reference_answer="r", kind="sonnet")


def test_human_eval_record_scale() -> None:
    HumanEvalRecord(item_id="x", rationality=1, correctness=2, consistency=3)
    with pytest.raises(BadItem):
        HumanEvalRecord(item_id="x", rationality=0, correctness=2, consistency=2)
    with pytest.raises(BadItem):
        HumanEvalRecord(item_id="x", rationality=1, correctness=4, consistency=2)


def test_benchmark_file_round_trip(tmp_path) -> None:
    objective = _items(3)
    subjective = [SubjectiveItem(id="s0", question="What is loess?", reference_answer="Silt.")]
    path = tmp_path / "bench.jsonl"
    write_benchmark(path, objective, subjective)
    read_obj, read_subj = load_benchmark(path)
    assert [i.to_dict() for i in read_obj] == [i.to_dict() for i in objective]
    assert [i.to_dict() for i in read_subj] == [i.to_dict() for i in subjective]


def test_evaluate_report_structure() -> None:
    report = evaluate(
        FavoringScorer("A"),
        _items(4, answer="A"),
        [SubjectiveItem(id="s", question="Explain basalt.", reference_answer="Dark rock.")],
        seed=5,
    )
    assert report.accuracy == 1.0
    assert report.total == 4
    assert report.per_subset == {"aptest": 1.0, "npee": 1.0}
    assert len(report.items) == 4
    assert report.items[0]["predicted"] == "A"
    assert len(report.subjective) == 1
    assert report.metadata["seed"] == 5
    assert report.metadata["prompt_version"] == "choice-v1"
    sub = report.subjective[0]
    assert sub["generated"] == "a generated answer"
    assert sub["perplexity"] == pytest.approx(math.e, abs=1e-9)
    assert sub["gptscore"] == pytest.approx(-4.0, abs=1e-9)


def test_evaluate_report_save_is_deterministic(tmp_path) -> None:
    report = evaluate(FavoringScorer("A"), _items(4))
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    report.save(a)
    evaluate(FavoringScorer("A"), _items(4)).save(b)
    assert a.read_bytes() == b.read_bytes()


def test_checkpoint_curve_orders_by_step() -> None:
    curve = checkpoint_curve(
        [(300, FavoringScorer("A")), (0, FavoringScorer("B")), (100, FavoringScorer("C"))],
        _items(6, answer="A"),
    )
    assert [p.step for p in curve.points] == [0, 100, 300]
    assert curve.points[2].accuracy == 1.0
    assert curve.points[0].accuracy == 0.0
    csv = curve.to_csv()
    assert csv.splitlines()[0] == "step,accuracy"
    assert len(csv.splitlines()) == 4


def test_checkpoint_curve_duplicate_step_rejected() -> None:
    with pytest.raises(DuplicateStep):
        checkpoint_curve(
            [(5, FavoringScorer("A")), (5, FavoringScorer("B"))], _items(2, answer="A")
        )


def test_checkpoint_curve_needs_two_points() -> None:
    with pytest.raises(ValueError):
        checkpoint_curve([(1, FavoringScorer("A"))], _items(2))


def test_checkpoint_curve_empty_items_propagates() -> None:
    with pytest.raises(ValueError):
        checkpoint_curve([(0, FavoringScorer("A")), (1, FavoringScorer("B"))], [])


def test_ablation_matrix_rows_sorted_and_deterministic() -> None:
    arms = {
        "zeta": FavoringScorer("A"),
        "alpha": FavoringScorer("B"),
    }
    rows = ablation_matrix(arms, _items(4, answer="A"))
    assert [row["arm"] for row in rows] == ["alpha", "zeta"]
    assert rows[1]["accuracy"] == 1.0
    assert rows[0]["accuracy"] == 0.0


def test_ablation_matrix_identical_arms_identical_rows() -> None:
    rows = ablation_matrix(
        {"one": FavoringScorer("A"), "two": FavoringScorer("A")}, _items(4, answer="A")
    )
    assert rows[0]["accuracy"] == rows[1]["accuracy"]
    stripped = [{k: v for k, v in row.items() if k != "arm"} for row in rows]
    assert stripped[0] == stripped[1]


def test_ablation_matrix_empty_arms_rejected() -> None:
    with pytest.raises(ValueError):
        ablation_matrix({}, _items(2))
