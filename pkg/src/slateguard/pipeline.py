"""End-to-end orchestration: propose, verify, repair, audit, replay.

Verification inside the pipeline always runs against metadata restricted to
the candidate window. A proposer that strays outside its window therefore
fails closed (the verifier sees missing metadata), without the verifier
itself needing to know what a window is. Audit records store the window so
replay can reconstruct the exact same scope later.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .audit import AuditRecord, Outcome
from .certificate import make_certificate, serialize_certificate
from .constraints import ConstraintSet, Slate
from .data import Interaction, ItemMeta
from .feasibility import SweepResult
from .mf import CandidateWindow, FactorModel, WindowEntry, top_w_window
from .metrics import ndcg_at_k
from .proposer import ProposerConfig, ProposerError, propose
from .repair import greedy_reference_slate, repair_greedy
from .verifier import FailureReason, VerifierVerdict, verify

GREEDY_METHOD = "greedy"


def scoped_metadata(
    window: CandidateWindow, metadata: Mapping[int, ItemMeta]
) -> dict[int, ItemMeta]:
    """Metadata restricted to the window; items outside it stay unknown."""
    return {
        e.item_id: metadata[e.item_id]
        for e in window.entries
        if e.item_id in metadata
    }


def _failed_proposal_verdict() -> VerifierVerdict:
    return VerifierVerdict(
        accepted=False,
        failure_reasons=(FailureReason.MALFORMED_CERT,),
        report=None,
    )


def run_user(
    user_id: int,
    window: CandidateWindow,
    metadata: Mapping[int, ItemMeta],
    constraints: ConstraintSet,
    proposer_config: ProposerConfig,
    repair: bool = True,
) -> AuditRecord:
    """One user through the full propose -> verify -> repair loop.

    Outcomes: PASS when the proposal verifies; FAIL_REPAIR_PASS when repair
    produced a verified slate; INFEASIBLE when the window admits no
    compliant slate at all; FAIL only with repair disabled, in which case
    the rejected proposal is still served but carries no final verdict.
    """
    scoped = scoped_metadata(window, metadata)
    rounds = 0
    try:
        proposal = propose(user_id, window, scoped, constraints, proposer_config)
        p_items: tuple[int, ...] | None = proposal.slate.items
        p_cert = serialize_certificate(proposal.certificate).decode("utf-8")
        rounds = len(proposal.transcript)
        p_verdict = verify(proposal.slate, proposal.certificate, scoped, constraints)
    except ProposerError:
        p_items, p_cert = None, None
        p_verdict = _failed_proposal_verdict()

    def record(
        outcome: Outcome,
        repair_applied: bool,
        final_items: tuple[int, ...] | None,
        final_cert: str | None,
        final_verdict: VerifierVerdict | None,
    ) -> AuditRecord:
        return AuditRecord(
            user_id=user_id,
            window_size=len(window.entries),
            window_items=window.item_ids,
            method=proposer_config.proposer_id,
            outcome=outcome,
            constraints=constraints,
            proposal_items=p_items,
            proposal_certificate=p_cert,
            proposal_verdict=p_verdict,
            repair_applied=repair_applied,
            final_items=final_items,
            final_certificate=final_cert,
            final_verdict=final_verdict,
            negotiation_rounds=rounds,
        )

    if p_verdict.accepted:
        return record(Outcome.PASS, False, p_items, p_cert, p_verdict)
    if not repair:
        # served unverified; the missing final verdict is the point
        return record(Outcome.FAIL, False, p_items, p_cert, None)

    repaired = repair_greedy(window, scoped, constraints)
    if repaired is None:
        return record(Outcome.INFEASIBLE, True, None, None, None)
    r_cert_obj = make_certificate(repaired, scoped, constraints, proposer_id="repair")
    r_verdict = verify(repaired, r_cert_obj, scoped, constraints)
    if not r_verdict.accepted:  # repair promises compliance; never mask a bug here
        raise RuntimeError(
            f"repair produced a non-compliant slate for user {user_id}: "
            f"{[r.value for r in r_verdict.failure_reasons]}"
        )
    r_cert = serialize_certificate(r_cert_obj).decode("utf-8")
    return record(Outcome.FAIL_REPAIR_PASS, True, repaired.items, r_cert, r_verdict)


def run_greedy_user(
    user_id: int,
    window: CandidateWindow,
    metadata: Mapping[int, ItemMeta],
    constraints: ConstraintSet,
) -> AuditRecord:
    """The constraint-aware reference: build the slate directly, no proposer."""
    scoped = scoped_metadata(window, metadata)
    slate = greedy_reference_slate(window, scoped, constraints)
    if slate is None:
        return AuditRecord(
            user_id=user_id,
            window_size=len(window.entries),
            window_items=window.item_ids,
            method=GREEDY_METHOD,
            outcome=Outcome.INFEASIBLE,
            constraints=constraints,
            proposal_items=None,
            proposal_certificate=None,
            proposal_verdict=None,
            repair_applied=False,
            final_items=None,
            final_certificate=None,
            final_verdict=None,
            negotiation_rounds=0,
        )
    cert_obj = make_certificate(slate, scoped, constraints, proposer_id=GREEDY_METHOD)
    verdict = verify(slate, cert_obj, scoped, constraints)
    if not verdict.accepted:
        raise RuntimeError(f"greedy reference slate rejected for user {user_id}")
    cert = serialize_certificate(cert_obj).decode("utf-8")
    return AuditRecord(
        user_id=user_id,
        window_size=len(window.entries),
        window_items=window.item_ids,
        method=GREEDY_METHOD,
        outcome=Outcome.PASS,
        constraints=constraints,
        proposal_items=slate.items,
        proposal_certificate=cert,
        proposal_verdict=verdict,
        repair_applied=False,
        final_items=slate.items,
        final_certificate=cert,
        final_verdict=verdict,
        negotiation_rounds=0,
    )


def run_method(
    windows: Mapping[int, CandidateWindow],
    metadata: Mapping[int, ItemMeta],
    constraints: ConstraintSet,
    proposer_config: ProposerConfig | None,
    repair: bool = True,
) -> list[AuditRecord]:
    """Run every user in ascending id order. None config means the greedy
    reference method."""
    records = []
    for user_id in sorted(windows):
        if proposer_config is None:
            records.append(
                run_greedy_user(user_id, windows[user_id], metadata, constraints)
            )
        else:
            records.append(
                run_user(
                    user_id, windows[user_id], metadata, constraints,
                    proposer_config, repair=repair,
                )
            )
    return records


def accepted_flags(records: Iterable[AuditRecord]) -> dict[int, bool]:
    return {
        r.user_id: r.outcome in (Outcome.PASS, Outcome.FAIL_REPAIR_PASS)
        for r in records
    }


def served_slates(records: Iterable[AuditRecord]) -> dict[int, tuple[int, ...]]:
    return {r.user_id: r.final_items for r in records if r.final_items is not None}


def mean_ndcg(
    slates: Mapping[int, Sequence[int]],
    relevance: Mapping[int, Mapping[int, int]],
    users: Iterable[int],
    k: int = 10,
) -> float:
    """Mean NDCG@k over the given users; a user served nothing scores 0."""
    ids = sorted(users)
    if not ids:
        raise ValueError("mean NDCG over an empty user set is undefined")
    total = 0.0
    for u in ids:
        items = slates.get(u)
        if items:
            total += ndcg_at_k(items, relevance.get(u, {}), k)
    return total / len(ids)


@dataclass(frozen=True)
class VerdictDrift:
    user_id: int
    method: str
    stage: str  # "proposal", "final", or "outcome"
    detail: str


def _verdict_summary(v: VerifierVerdict) -> str:
    return f"accepted={v.accepted} reasons={[r.value for r in v.failure_reasons]}"


def _implied_outcome(rec: AuditRecord) -> Outcome:
    """The outcome the record's own verdicts imply; the label must agree."""
    if rec.proposal_verdict is not None and rec.proposal_verdict.accepted:
        return Outcome.PASS
    if rec.final_verdict is not None and rec.final_verdict.accepted:
        return Outcome.FAIL_REPAIR_PASS
    if rec.final_items is None:
        return Outcome.INFEASIBLE
    return Outcome.FAIL


def verify_log(
    records: Iterable[AuditRecord],
    metadata: Mapping[int, ItemMeta],
) -> tuple[int, list[VerdictDrift]]:
    """Re-verify every stored (slate, certificate, verdict) triple.

    Replays under metadata scoped to the recorded window, i.e. exactly what
    the pipeline saw, and also checks each record's outcome label against
    what its stored verdicts imply. Returns (number of verdicts replayed,
    drift list); an empty drift list means the log is internally consistent
    with the verifier as currently implemented.
    """
    replayed = 0
    drifts: list[VerdictDrift] = []
    for rec in records:
        scoped = {i: metadata[i] for i in rec.window_items if i in metadata}
        stages = (
            ("proposal", rec.proposal_items, rec.proposal_certificate, rec.proposal_verdict),
            ("final", rec.final_items, rec.final_certificate, rec.final_verdict),
        )
        for stage, items, cert_text, stored in stages:
            if items is None or cert_text is None or stored is None:
                continue
            fresh = verify(
                Slate(user_id=rec.user_id, items=items),
                cert_text,
                scoped,
                rec.constraints,
            )
            replayed += 1
            if fresh != stored:
                drifts.append(
                    VerdictDrift(
                        user_id=rec.user_id,
                        method=rec.method,
                        stage=stage,
                        detail=f"stored {_verdict_summary(stored)}, "
                        f"replayed {_verdict_summary(fresh)}",
                    )
                )
        implied = _implied_outcome(rec)
        if rec.outcome is not implied:
            drifts.append(
                VerdictDrift(
                    user_id=rec.user_id,
                    method=rec.method,
                    stage="outcome",
                    detail=f"stored outcome={rec.outcome.value}, "
                    f"verdicts imply {implied.value}",
                )
            )
    return replayed, drifts


def build_windows(
    model: FactorModel,
    user_ids: Iterable[int],
    catalog_ids: Iterable[int],
    seen_by_user: Mapping[int, set[int]],
    w: int,
) -> dict[int, CandidateWindow]:
    """Windows for every user that has at least w unseen catalog items.

    Users too close to exhausting the catalog are skipped rather than given
    short windows; sweep prefixes and run windows must line up exactly.
    """
    catalog = set(catalog_ids)
    out: dict[int, CandidateWindow] = {}
    for user_id in sorted(set(user_ids)):
        seen = seen_by_user.get(user_id, set())
        if len(catalog - seen) < w:
            continue
        out[user_id] = top_w_window(model, user_id, catalog, seen, w)
    return out


def seen_items_by_user(train: Iterable[Interaction]) -> dict[int, set[int]]:
    seen: dict[int, set[int]] = {}
    for x in train:
        seen.setdefault(x.user_id, set()).add(x.item_id)
    return seen


# ---------------------------------------------------------------------------
# artifact I/O


def write_windows(windows: Mapping[int, CandidateWindow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for user_id in sorted(windows):
            entries = [[e.item_id, e.score] for e in windows[user_id].entries]
            fh.write(json.dumps({"user_id": user_id, "entries": entries}) + "\n")


def load_windows(path: str | Path) -> dict[int, CandidateWindow]:
    out: dict[int, CandidateWindow] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out[obj["user_id"]] = CandidateWindow(
                user_id=obj["user_id"],
                entries=tuple(
                    WindowEntry(item_id=i, score=s) for i, s in obj["entries"]
                ),
            )
    return out


def write_feasibility_curve(
    sweep: SweepResult, path: str | Path, operating_w: int
) -> None:
    lines = [
        "window_size\tfeasible_count\ttotal_users\tfeasibility_rate"
        "\tmean_tail_shortage\toperating_point"
    ]
    for p in sweep.points:
        mark = "yes" if p.window_size == operating_w else ""
        lines.append(
            f"{p.window_size}\t{p.feasible_count}\t{p.total_users}"
            f"\t{p.feasibility_rate:.6f}\t{p.mean_tail_shortage:.6f}\t{mark}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_feasible_users(sweep: SweepResult, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for w, flags in sorted(sweep.per_user.items()):
            for user_id in sorted(flags):
                fh.write(
                    json.dumps(
                        {"window_size": w, "user_id": user_id, "feasible": flags[user_id]}
                    )
                    + "\n"
                )


def load_feasible_users(path: str | Path, w: int) -> set[int]:
    out: set[int] = set()
    seen_w = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            seen_w.add(obj["window_size"])
            if obj["window_size"] == w and obj["feasible"]:
                out.add(obj["user_id"])
    if w not in seen_w:
        raise ValueError(f"feasibility file has no rows for window size {w}")
    return out
