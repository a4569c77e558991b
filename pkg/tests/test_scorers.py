from __future__ import annotations

import math
import threading

import numpy as np
import pytest

from geolm.adapters.sft import conditioned_tokens
from geolm.bench.metrics import gptscore
from geolm.bench.protocol import RemoteScorer, ScoringServer, handle_line
from geolm.bench.scorers import LocalScorer, ScorerUnavailable, parse_scorer_spec
from geolm.model.checkpoint import Checkpoint, save_checkpoint
from geolm.model.config import ModelConfig
from geolm.model.network import init_params, loss_and_grads, pad_batch
from geolm.model.tokenizer import TOKENIZER

CFG = ModelConfig(d_model=32, n_layers=2, n_heads=2, context_len=64)


@pytest.fixture(scope="module")
def local_scorer() -> LocalScorer:
    ckpt = Checkpoint(config=CFG, tensors=init_params(CFG, seed=11), step=42)
    return LocalScorer(ckpt)


def test_token_logprobs_conditioned_length(local_scorer) -> None:
    values = local_scorer.token_logprobs("hello ", "world")
    assert len(values) == len(TOKENIZER.encode("world"))
    assert all(v <= 0.0 for v in values)


def test_token_logprobs_self_mode_length(local_scorer) -> None:
    values = local_scorer.token_logprobs("hello")
    assert len(values) == len(TOKENIZER.encode("hello")) - 1


def test_next_token_logprobs_matches_single_calls(local_scorer) -> None:
    row = local_scorer.next_token_logprobs("The rock is")
    for letter in ("A", "B", "x"):
        single = local_scorer.token_logprobs("The rock is", letter)[0]
        assert row[TOKENIZER.encode(letter)[0]] == pytest.approx(single, abs=1e-9)
    # full row is a normalized distribution
    assert np.exp(row).sum() == pytest.approx(1.0, abs=1e-9)


def test_generate_greedy_deterministic(local_scorer) -> None:
    a = local_scorer.generate("abc", max_new=8)
    b = local_scorer.generate("abc", max_new=8)
    assert a == b


def test_generate_zero_tokens(local_scorer) -> None:
    assert local_scorer.generate("abc", max_new=0) == ""


def test_generate_sampling_seeded(local_scorer) -> None:
    a = local_scorer.generate("abc", max_new=8, mode="sample", seed=3, temperature=1.5)
    b = local_scorer.generate("abc", max_new=8, mode="sample", seed=3, temperature=1.5)
    c = local_scorer.generate("abc", max_new=8, mode="sample", seed=4, temperature=1.5)
    assert a == b
    assert a != c


def test_gptscore_matches_masked_loss(local_scorer) -> None:
    """Cross-module consistency: gptscore == -(masked mean NLL) on one pair."""
    prompt, continuation = "Describe basalt: ", "a dark volcanic rock"
    value = gptscore(local_scorer, prompt, continuation)
    ids, mask = conditioned_tokens(prompt, continuation, append_eos=False)
    batch_ids, batch_mask = pad_batch([ids], [mask], TOKENIZER.pad_id)
    nll, count, _ = loss_and_grads(
        CFG, local_scorer.ckpt.tensors, batch_ids, batch_mask, train_base=False
    )
    assert value == pytest.approx(-(nll / count), abs=1e-6)


def test_parse_scorer_spec_local(tmp_path) -> None:
    ckpt = Checkpoint(config=CFG, tensors=init_params(CFG, seed=11), step=7)
    path = tmp_path / "m.tlm"
    save_checkpoint(path, ckpt)
    scorer = parse_scorer_spec(f"local:{path}")
    assert scorer.token_logprobs("ab", "c")


def test_parse_scorer_spec_errors() -> None:
    with pytest.raises(ValueError):
        parse_scorer_spec("nonsense")
    with pytest.raises(ValueError):
        parse_scorer_spec("remote:nohost")


def test_handle_line_logprobs(local_scorer) -> None:
    import json

    response = json.loads(
        handle_line(local_scorer, json.dumps({"req_id": "1", "op": "logprobs", "text": "abc"}))
    )
    assert response["req_id"] == "1"
    assert len(response["token_logprobs"]) == 2


def test_handle_line_bad_json(local_scorer) -> None:
    import json

    response = json.loads(handle_line(local_scorer, "{not json"))
    assert response["error"] == "bad_request"


def test_handle_line_unknown_op(local_scorer) -> None:
    import json

    response = json.loads(
        handle_line(local_scorer, json.dumps({"req_id": "9", "op": "explode", "text": "x"}))
    )
    assert response == {"req_id": "9", "error": "unknown_op"}


def test_handle_line_missing_text(local_scorer) -> None:
    import json

    response = json.loads(handle_line(local_scorer, json.dumps({"req_id": "2", "op": "logprobs"})))
    assert response["error"] == "bad_request"


@pytest.fixture()
def tcp_server(local_scorer):
    server = ScoringServer(("127.0.0.1", 0), local_scorer)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server.server_address
    server.shutdown()


def test_remote_matches_local_exactly(local_scorer, tcp_server) -> None:
    host, port = tcp_server
    remote = RemoteScorer(host, port)
    local_values = local_scorer.token_logprobs("geology ", "rocks")
    remote_values = remote.token_logprobs("geology ", "rocks")
    assert remote_values == pytest.approx(local_values, abs=1e-12)
    assert remote.token_logprobs("geology") == pytest.approx(
        local_scorer.token_logprobs("geology"), abs=1e-12
    )
    assert remote.generate("ab", max_new=4) == local_scorer.generate("ab", max_new=4)


def test_remote_parallel_requests(local_scorer, tcp_server) -> None:
    host, port = tcp_server
    remote = RemoteScorer(host, port, max_inflight=3)
    results: list[list[float]] = [[] for _ in range(6)]

    def work(i: int) -> None:
        results[i] = remote.token_logprobs("abc", "d")

    threads = [threading.Thread(target=work, args=(i,)) for i in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    expected = local_scorer.token_logprobs("abc", "d")
    for got in results:
        assert got == pytest.approx(expected, abs=1e-12)


def test_remote_unavailable_raises() -> None:
    remote = RemoteScorer("127.0.0.1", 1, timeout=0.2)  # nothing listens on port 1
    with pytest.raises(ScorerUnavailable):
        remote.token_logprobs("x", "y")


def test_remote_error_response_raises() -> None:
    import json
    import socketserver

    class ErrorHandler(socketserver.StreamRequestHandler):
        def handle(self) -> None:
            for raw in self.rfile:
                request = json.loads(raw)
                reply = {"req_id": request["req_id"], "error": "internal_error"}
                self.wfile.write((json.dumps(reply) + "\n").encode("utf-8"))

    with socketserver.ThreadingTCPServer(("127.0.0.1", 0), ErrorHandler) as server:
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        host, port = server.server_address
        remote = RemoteScorer(host, port)
        with pytest.raises(ScorerUnavailable, match="internal_error"):
            remote.token_logprobs("x", "y")
        server.shutdown()
