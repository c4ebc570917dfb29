"""Governed top-N recommendation with verifiable slate certificates."""

from .audit import AuditRecord, Outcome
from .certificate import (
    Certificate,
    CertificateError,
    make_certificate,
    parse_certificate,
    serialize_certificate,
)
from .constraints import ConstraintReport, ConstraintSet, Slate, evaluate_all
from .data import Bucket, Interaction, ItemMeta
from .feasibility import FeasibilityResult, feasibility_sweep, is_feasible_exact
from .mf import CandidateWindow, FactorModel, Hyperparams, top_w_window, train_mf
from .metrics import dcg_at_k, ndcg_at_k, paired_bootstrap_test, pass_rate
from .proposer import Proposal, ProposerConfig, ProposerError, ProposerKind, propose
from .repair import constrained_optimum_exact, greedy_reference_slate, repair_greedy
from .verifier import FailureReason, VerifierVerdict, verify

__version__ = "0.1.0"

__all__ = [
    "AuditRecord",
    "Bucket",
    "CandidateWindow",
    "Certificate",
    "CertificateError",
    "ConstraintReport",
    "ConstraintSet",
    "FactorModel",
    "FailureReason",
    "FeasibilityResult",
    "Hyperparams",
    "Interaction",
    "ItemMeta",
    "Outcome",
    "Proposal",
    "ProposerConfig",
    "ProposerError",
    "ProposerKind",
    "Slate",
    "VerifierVerdict",
    "constrained_optimum_exact",
    "dcg_at_k",
    "evaluate_all",
    "feasibility_sweep",
    "greedy_reference_slate",
    "is_feasible_exact",
    "make_certificate",
    "ndcg_at_k",
    "paired_bootstrap_test",
    "parse_certificate",
    "pass_rate",
    "propose",
    "repair_greedy",
    "serialize_certificate",
    "top_w_window",
    "train_mf",
    "verify",
]
