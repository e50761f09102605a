"""Cycle-level OBI / relOBI crossbar simulator with SECDED, TMR and fault injection."""

from .codec import (
    DEFAULT_GROUPS, HANDSHAKES, Decoded, Group, GroupingPlan, HsiaoCode, RelPhase, Status, TriSignal,
    build_hsiao, check_bits_for, default_plan, ecc_decode, ecc_encode, obi_plan, plan_width,
    relobi_decode, relobi_encode, vote, vote3,
)
from .crossbar import (
    Crossbar, CrossbarTopology, DeadlockError, GoldenRun, build_crossbar, golden_run,
)
from .blocks import AddressMap, route
from .faults import (
    CampaignConfig, CampaignReport, FaultKind, FaultSession, FaultSpec, FaultTarget, Outcome,
    classify, enumerate_targets, run_campaign, run_with_fault, sample_faults,
)
from .obi import (
    ATransfer, BusConfig, EventKind, ManagerScript, RTransfer, ScriptEntry, Side, TraceEvent,
    Verdict, generate_script, scoreboard_verify, scoreboard_verify_ordered, total_width,
    zero_optional_config,
)

__all__ = [
    "ATransfer", "AddressMap", "BusConfig", "CampaignConfig", "CampaignReport", "Crossbar",
    "CrossbarTopology", "DEFAULT_GROUPS", "DeadlockError", "Decoded", "EventKind", "FaultKind",
    "FaultSession", "FaultSpec", "FaultTarget", "GoldenRun", "Group", "GroupingPlan", "HANDSHAKES",
    "HsiaoCode", "ManagerScript", "Outcome", "RTransfer", "RelPhase", "ScriptEntry", "Side",
    "Status", "TraceEvent", "TriSignal", "Verdict", "build_crossbar", "build_hsiao",
    "check_bits_for", "classify", "default_plan", "ecc_decode", "ecc_encode", "enumerate_targets",
    "generate_script", "golden_run", "obi_plan", "plan_width", "relobi_decode", "relobi_encode",
    "route", "run_campaign", "run_with_fault", "sample_faults", "scoreboard_verify",
    "scoreboard_verify_ordered", "total_width", "vote", "vote3", "zero_optional_config",
]
