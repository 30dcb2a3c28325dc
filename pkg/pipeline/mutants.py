"""
Deliberately broken protocol variants used to check that the oracles bite.
"""

from modules.events import EventKind
from modules.machine import Goto, Return
from modules.protocol_core import ENGAGING, ClaimRoutine, ScheduleRoutine, build_program


class BlindOwnerStoreClaim(ClaimRoutine):
    """Takes ownership at the head of the queue with a plain store instead of a CAS."""

    def line5(self, regs, ctx):
        old = ctx.mem.store_owner(regs.pid)
        ctx.emit(EventKind.OWNER_STORE, expected=old, new=regs.pid, line=5)
        return Goto('activate', regs._replace(line=6))


class SingleCasSchedule(ScheduleRoutine):
    """Gives up after the ENGAGING -> SCHEDULED attempt, never waking a WAITING target."""

    def from_engaging(self, frame, ctx):
        self._cas_state(ctx, frame.regs.target, ENGAGING)
        return Return(None)


class GrantOnWaitClaim(ClaimRoutine):
    """Reports the claim granted after parking itself in WAITING."""

    def line14(self, frame, ctx):
        regs = frame.regs
        if self._cas_state(ctx, regs.pid, 14):
            ctx.emit(EventKind.END_CLAIM_GRANTED, line=15)
            return Return(True)
        return Goto('activate', regs._replace(line=17))


MUTANTS = {
    'blind-owner-store': (BlindOwnerStoreClaim(),),
    'drop-schedule-retry': (SingleCasSchedule(),),
    'grant-on-wait': (GrantOnWaitClaim(),),
}


def build(name=None):
    """Protocol program with the named mutation applied (None: the real protocol)."""
    if name is None:
        return build_program()
    try:
        return build_program(*MUTANTS[name])
    except KeyError:
        raise ValueError(f"unknown mutant {name!r}; choose from {sorted(MUTANTS)}") from None
