"""Proposers: negotiation dynamics, fault injection, remote transport."""
from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from slateguard.certificate import parse_certificate, serialize_certificate
from slateguard.constraints import ConstraintSet, Slate, evaluate_all
from slateguard.proposer import (
    EndpointConfig,
    ProposerConfig,
    ProposerError,
    ProposerKind,
    heuristic_negotiate,
    propose,
    remote_propose,
)
from slateguard.verifier import FailureReason, verify
from helpers import instance

CS = ConstraintSet(tau="0.5", kappa="0.5", g_min=3, n=4)

# raw top-4 is all-head single-genre; compliant slates exist further down
ROWS = [
    (1, 0.90, "H", ("g0",)),
    (2, 0.85, "H", ("g0",)),
    (3, 0.80, "H", ("g0",)),
    (4, 0.75, "H", ("g1",)),
    (5, 0.70, "T", ("g2",)),
    (6, 0.65, "T", ("g0",)),
    (7, 0.60, "T", ("g1", "g2")),
    (8, 0.55, "H", ("g3",)),
]


def test_negotiation_reaches_compliance_and_certifies_honestly():
    window, metadata = instance(3, ROWS)
    proposal = heuristic_negotiate(3, window, metadata, CS, rounds=8, proposer_id="unit")
    verdict = verify(proposal.slate, proposal.certificate, metadata, CS)
    assert verdict.accepted
    assert 0 < len(proposal.transcript) <= 8


def test_negotiation_opens_with_the_raw_top_n():
    window, metadata = instance(3, ROWS)
    proposal = heuristic_negotiate(3, window, metadata, CS, rounds=8, proposer_id="unit")
    assert proposal.transcript[0].advocate_items == window.item_ids[: CS.n]


def test_every_accepted_round_strictly_reduces_total_deficiency():
    from slateguard.proposer import _deficiency

    window, metadata = instance(3, ROWS)
    proposal = heuristic_negotiate(3, window, metadata, CS, rounds=8, proposer_id="unit")
    last = None
    for rnd in proposal.transcript:
        d = sum(_deficiency(rnd.advocate_items, metadata, CS))
        if last is not None:
            assert d < last
        if rnd.accepted:
            last = d


def test_compliant_opening_needs_no_rounds():
    rows = [
        (1, 0.9, "T", ("g0",)),
        (2, 0.8, "T", ("g1",)),
        (3, 0.7, "H", ("g2",)),
        (4, 0.6, "H", ("g3",)),
        (5, 0.5, "H", ("g0",)),
    ]
    window, metadata = instance(3, rows)
    proposal = heuristic_negotiate(3, window, metadata, CS, rounds=8, proposer_id="unit")
    assert proposal.transcript == ()
    assert proposal.slate.items == (1, 2, 3, 4)


def test_certificate_is_honest_even_when_negotiation_stalls():
    # nothing but heads: no swap can help, loop must stop, claims stay true
    rows = [(i, 1.0 - i / 20, "H", ("g0",)) for i in range(1, 7)]
    window, metadata = instance(3, rows)
    proposal = heuristic_negotiate(3, window, metadata, CS, rounds=8, proposer_id="unit")
    assert len(proposal.transcript) <= 8
    verdict = verify(proposal.slate, proposal.certificate, metadata, CS)
    assert not verdict.accepted
    # rejected for policy violations, never for dishonest claims
    assert FailureReason.CLAIM_TAIL_MISMATCH not in verdict.failure_reasons
    assert FailureReason.CLAIM_GENRE_MISMATCH not in verdict.failure_reasons


def test_faulty_at_probability_one_ships_the_raw_top_n():
    window, metadata = instance(3, ROWS)
    cfg = ProposerConfig(kind=ProposerKind.FAULTY, fault_probability=1.0, seed=5)
    proposal = propose(3, window, metadata, CS, cfg)
    assert proposal.slate.items == window.item_ids[: CS.n]
    assert not evaluate_all(proposal.slate, metadata, CS).pass_all
    verdict = verify(proposal.slate, proposal.certificate, metadata, CS)
    assert not verdict.accepted
    assert FailureReason.CLAIM_TAIL_MISMATCH not in verdict.failure_reasons


def test_faulty_at_probability_zero_negotiates_normally():
    window, metadata = instance(3, ROWS)
    cfg = ProposerConfig(kind=ProposerKind.FAULTY, fault_probability=0.0, seed=5)
    honest = heuristic_negotiate(3, window, metadata, CS, rounds=8, proposer_id="faulty")
    assert propose(3, window, metadata, CS, cfg).slate == honest.slate


def test_faulty_draw_is_per_user_and_order_independent():
    window, metadata = instance(3, ROWS)
    cfg = ProposerConfig(kind=ProposerKind.FAULTY, fault_probability=0.5, seed=9)
    first = [propose(u, window, metadata, CS, cfg).slate.items for u in (1, 2, 3, 4)]
    second = [
        propose(u, window, metadata, CS, cfg).slate.items for u in (4, 3, 2, 1)
    ][::-1]
    assert first == second


def test_proposer_config_validation():
    with pytest.raises(ValueError):
        ProposerConfig(kind=ProposerKind.HEURISTIC, rounds=0)
    with pytest.raises(ValueError):
        ProposerConfig(kind=ProposerKind.FAULTY, fault_probability=1.5)
    with pytest.raises(ValueError):
        ProposerConfig(kind=ProposerKind.REMOTE)  # endpoint required
    with pytest.raises(ValueError):
        ProposerConfig(kind=ProposerKind.HEURISTIC, endpoint=EndpointConfig(url="http://x"))
    assert ProposerConfig(kind=ProposerKind.FAULTY).proposer_id == "faulty"


class _StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers["Content-Length"])
        payload = json.loads(self.rfile.read(length))
        self.server.last_payload = payload
        status, body = self.server.make_response(payload)
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture()
def stub_server():
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    server.last_payload = None
    server.make_response = lambda payload: (200, b"{}")
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    thread.join()


def _honest_body(payload):
    """Build a certificate for the first n candidates, claims from the payload."""
    n = payload["n"]
    picked = payload["candidates"][:n]
    doc = {
        "schema_version": payload["schema_version"],
        "user_id": payload["user_id"],
        "slate_items": [c["item_id"] for c in picked],
        "claimed_tail_items": sorted(c["item_id"] for c in picked if c["bucket"] == "TAIL"),
        "claimed_covered_genres": sorted({g for c in picked for g in c["genres"]}),
        "thresholds": payload["thresholds"],
        "proposer_id": "stub",
    }
    return json.dumps(doc).encode("utf-8")


def test_remote_roundtrip_carries_window_facts_and_returns_the_cert(stub_server):
    stub_server.make_response = lambda payload: (200, _honest_body(payload))
    window, metadata = instance(3, ROWS)
    endpoint = EndpointConfig(url=f"http://127.0.0.1:{stub_server.server_address[1]}/")
    proposal = remote_propose(3, window, CS, metadata, endpoint)
    assert proposal.slate.items == window.item_ids[: CS.n]
    assert proposal.certificate.proposer_id == "stub"
    assert proposal.transcript == ()
    payload = stub_server.last_payload
    assert payload["user_id"] == 3
    assert [c["item_id"] for c in payload["candidates"]] == list(window.item_ids)
    assert payload["candidates"][4]["bucket"] == "TAIL"
    assert payload["thresholds"]["tau"] == 0.5
    # the echoed claims verify like any local certificate would
    verdict = verify(proposal.slate, proposal.certificate, metadata, CS)
    assert FailureReason.CLAIM_TAIL_MISMATCH not in verdict.failure_reasons


def test_remote_bad_certificate_raises_proposer_error(stub_server):
    stub_server.make_response = lambda payload: (200, b'{"nope": 1}')
    window, metadata = instance(3, ROWS)
    endpoint = EndpointConfig(url=f"http://127.0.0.1:{stub_server.server_address[1]}/")
    with pytest.raises(ProposerError):
        remote_propose(3, window, CS, metadata, endpoint)


def test_remote_connection_failure_raises_proposer_error():
    window, metadata = instance(3, ROWS)
    endpoint = EndpointConfig(url="http://127.0.0.1:9/", timeout_s=0.5)
    with pytest.raises(ProposerError):
        remote_propose(3, window, CS, metadata, endpoint)


def test_remote_http_error_raises_proposer_error(stub_server):
    stub_server.make_response = lambda payload: (500, b"over capacity")
    window, metadata = instance(3, ROWS)
    endpoint = EndpointConfig(url=f"http://127.0.0.1:{stub_server.server_address[1]}/")
    with pytest.raises(ProposerError):
        remote_propose(3, window, CS, metadata, endpoint)


def test_roundtrip_of_remote_certificate_bytes(stub_server):
    stub_server.make_response = lambda payload: (200, _honest_body(payload))
    window, metadata = instance(3, ROWS)
    endpoint = EndpointConfig(url=f"http://127.0.0.1:{stub_server.server_address[1]}/")
    proposal = remote_propose(3, window, CS, metadata, endpoint)
    blob = serialize_certificate(proposal.certificate)
    assert parse_certificate(blob) == proposal.certificate
