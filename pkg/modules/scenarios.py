"""
The ten ways a claim can resolve, and their expected CAS cost.

A claim is identified by the owner/state writes it performed (algorithm line
and whether the write took effect) plus whether it was granted. Plain owner
stores count as writes that always take effect.
"""

from typing import NamedTuple, Optional

from .errors import UnclassifiedPathError
from .events import CasTarget, EventKind


class Scenario(NamedTuple):
    id: int
    name: str
    outcome: str
    resolution: str
    min_cas: int
    max_cas: Optional[int]   # None: unbounded (waits for a release)


SCENARIOS = {
    1: Scenario(1, 'Unclaimed', 'Claimed', 'Fast', 3, 4),
    2: Scenario(2, 'Claimed resource', 'Unclaimed', 'Fast', 3, None),
    3: Scenario(3, 'Released-in-time', 'Claimed', 'Fast', 3, 3),
    4: Scenario(4, 'Owner null', 'Claimed', 'Fast', 3, 4),
    5: Scenario(5, 'Unscheduled owner transfer', 'Claimed', 'Slow or busy', 4, 5),
    6: Scenario(6, 'Scheduled owner transfer', 'Claimed', 'Fast', 4, 5),
    7: Scenario(7, 'Ownership stolen', 'Claimed', 'Fast', 4, 5),
    8: Scenario(8, 'Released, owner null', 'Claimed', 'Fast', 5, 6),
    9: Scenario(9, 'Released, unscheduled', 'Claimed', 'Slow or busy', 6, 7),
    10: Scenario(10, 'Released, scheduled', 'Claimed', 'Fast', 6, 7),
}

T, F = True, False

_PATHS = {
    (((5, T),), True): 1,
    (((32, T),), False): 2,
    (((32, F),), True): 3,
    (((5, F), (11, T)), True): 4,
    (((5, F), (14, T)), False): 5,
    (((5, F), (14, F)), True): 6,
    (((5, F), (19, T)), True): 7,
    (((5, F), (19, F), (22, T)), True): 8,
    (((5, F), (19, F), (22, F), (25, T)), False): 9,
    (((5, F), (19, F), (22, F), (25, F)), True): 10,
}

_PROTOCOL_TARGETS = (CasTarget.OWNER, CasTarget.STATE)


def path_signature(events):
    """Owner/state write path of one claim's events, as ((line, took_effect), ...)."""
    signature = []
    for event in events:
        if event.kind is EventKind.CAS and event.target in _PROTOCOL_TARGETS and event.line:
            signature.append((event.line, bool(event.success)))
        elif event.kind is EventKind.OWNER_STORE:
            signature.append((event.line, True))
    return tuple(signature)


def classify_signature(signature, granted):
    try:
        return _PATHS[(tuple(signature), bool(granted))]
    except KeyError:
        raise UnclassifiedPathError(tuple(signature), granted) from None


def scenario_classify(trace_slice, granted=None):
    """Scenario id (1..10) of the claim whose events are `trace_slice`.

    The slice runs from the claim's begin to its end event and holds only the
    claimant's own steps. `granted` is taken from the end event unless given.
    """
    if granted is None:
        ends = [e for e in trace_slice
                if e.kind in (EventKind.END_CLAIM_GRANTED, EventKind.END_CLAIM_DENIED)
                and not e.resumed]
        if not ends:
            raise UnclassifiedPathError(path_signature(trace_slice), None)
        granted = ends[-1].kind is EventKind.END_CLAIM_GRANTED
    return classify_signature(path_signature(trace_slice), granted)


def within_bounds(scenario_id, min_cas, max_cas):
    """True if observed CAS counts lie inside the table bounds of the scenario."""
    row = SCENARIOS[scenario_id]
    if min_cas < row.min_cas:
        return False
    return row.max_cas is None or max_cas <= row.max_cas
