"""Single-decree Paxos over arbitrary Phase-1/Phase-2 quorum families.

Acceptor transitions are pure functions (:func:`on_prepare`, :func:`on_accept`).
:class:`PaxosInstance` hosts one acceptor per node for one consensus scope
inside an :class:`~crumblewall.simcore.Engine`; :class:`Proposer` runs one
two-phase round per attempt with a per-phase timeout and no retries.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Callable

from .quorum import QuorumFamily, is_member
from .simcore import Engine
from .topology import NodeId


@dataclass(frozen=True, order=True)
class Ballot:
    round: int
    proposer: NodeId

    def __str__(self) -> str:
        return f"{self.round}.{self.proposer.label}"


@dataclass(frozen=True)
class AcceptorState:
    promised: Ballot | None = None
    accepted: tuple[Ballot, Any] | None = None


# messages; every reply names the acceptor that sent it


@dataclass(frozen=True)
class Prepare:
    ballot: Ballot


@dataclass(frozen=True)
class Accept:
    ballot: Ballot
    value: Any


@dataclass(frozen=True)
class Promise:
    ballot: Ballot
    accepted: tuple[Ballot, Any] | None
    acceptor: NodeId | None = None


@dataclass(frozen=True)
class Accepted:
    ballot: Ballot
    acceptor: NodeId | None = None


@dataclass(frozen=True)
class Nack:
    ballot: Ballot
    promised: Ballot
    acceptor: NodeId | None = None


def on_prepare(s: AcceptorState, b: Ballot) -> tuple[AcceptorState, Promise | Nack]:
    if s.promised is None or b > s.promised:
        return replace(s, promised=b), Promise(b, s.accepted)
    return s, Nack(b, s.promised)


def on_accept(s: AcceptorState, b: Ballot, v: Any) -> tuple[AcceptorState, Accepted | Nack]:
    if s.promised is None or b >= s.promised:
        return AcceptorState(promised=b, accepted=(b, v)), Accepted(b)
    return s, Nack(b, s.promised)


class Status(str, Enum):
    COMMITTED = "committed"
    TIMED_OUT = "timed_out"
    NO_QUORUM = "no_quorum"


@dataclass(frozen=True)
class AttemptOutcome:
    started_at: float
    status: Status
    ended_at: float
    ballot: Ballot | None = None
    value: Any = None
    phase: int | None = None  # the phase that timed out

    @property
    def committed(self) -> bool:
        return self.status is Status.COMMITTED

    @property
    def latency(self) -> float | None:
        return self.ended_at - self.started_at if self.committed else None


@dataclass(frozen=True)
class Commit:
    time: float
    ballot: Ballot
    value: Any


@dataclass(frozen=True)
class Phase1Result:
    time: float
    attempt_started: float
    ballot: Ballot
    adopted: Any
    own_value: Any


class PaxosInstance:
    """The acceptors of one single-decree scope, plus what its proposers learned."""

    def __init__(self, engine: Engine, acceptors, name: str = "global") -> None:
        self.engine = engine
        self.name = name
        self.states: dict[NodeId, AcceptorState] = {n: AcceptorState() for n in sorted(acceptors)}
        self.commits: list[Commit] = []
        self.phase1_log: list[Phase1Result] = []

    def deliver(self, node: NodeId, message, proposer: Proposer) -> None:
        state = self.states[node]
        if isinstance(message, Prepare):
            state, reply = on_prepare(state, message.ballot)
        else:
            state, reply = on_accept(state, message.ballot, message.value)
        self.states[node] = state
        self.engine.send(node, proposer.node, replace(reply, acceptor=node), proposer.receive)

    def committed_values(self) -> set:
        return {c.value for c in self.commits}


class _Attempt:
    __slots__ = ("ballot", "value", "started_at", "budget", "phase", "promised",
                 "best", "accepted", "on_done", "outcome")

    def __init__(self, ballot, value, started_at, budget, on_done) -> None:
        self.ballot = ballot
        self.value = value
        self.started_at = started_at
        self.budget = budget
        self.phase = 1
        self.promised: set[NodeId] = set()
        self.best: tuple[Ballot, Any] | None = None
        self.accepted: set[NodeId] = set()
        self.on_done = on_done
        self.outcome: AttemptOutcome | None = None


class Proposer:
    """A proposer colocated with the acceptor at ``node``."""

    def __init__(
        self,
        instance: PaxosInstance,
        node: NodeId,
        q1: QuorumFamily,
        q2: QuorumFamily,
    ) -> None:
        self.instance = instance
        self.engine = instance.engine
        self.node = node
        self.q1 = q1
        self.q2 = q2
        self._q1_targets = sorted(q1.universe)
        self._q2_targets = sorted(q2.universe)
        self.highest_round = 0
        self.attempts: list[AttemptOutcome] = []
        self._open: dict[Ballot, _Attempt] = {}

    def next_ballot(self) -> Ballot:
        self.highest_round += 1
        return Ballot(self.highest_round, self.node)

    def start(
        self,
        value: Any,
        round_budget: float,
        on_done: Callable[[AttemptOutcome], Any] | None = None,
    ) -> Ballot:
        """Begin one attempt now. ``on_done`` fires when it commits or times out."""
        engine = self.engine
        att = _Attempt(self.next_ballot(), value, engine.now, round_budget, on_done)
        self._open[att.ballot] = att
        engine.schedule(engine.now + round_budget / 2, self._phase_deadline, att, 1)
        engine.schedule(engine.now + round_budget, self._phase_deadline, att, 2)
        msg = Prepare(att.ballot)
        for acc in self._q1_targets:
            engine.send(self.node, acc, msg, self._to_acceptor(acc))
        return att.ballot

    def _to_acceptor(self, acc: NodeId):
        instance = self.instance
        return lambda m: instance.deliver(acc, m, self)

    def receive(self, reply) -> None:
        if isinstance(reply, Nack):
            self.highest_round = max(self.highest_round, reply.promised.round)
            return
        att = self._open.get(reply.ballot)
        if att is None:
            return
        if isinstance(reply, Promise):
            if att.phase != 1:
                return
            att.promised.add(reply.acceptor)
            if reply.accepted is not None and (att.best is None or reply.accepted[0] > att.best[0]):
                att.best = reply.accepted
            if is_member(self.q1, att.promised):
                self._begin_phase2(att)
        elif isinstance(reply, Accepted):
            if att.phase != 2:
                return
            att.accepted.add(reply.acceptor)
            if is_member(self.q2, att.accepted):
                self.instance.commits.append(Commit(self.engine.now, att.ballot, att.value))
                self._finish(att, Status.COMMITTED)

    def _begin_phase2(self, att: _Attempt) -> None:
        att.phase = 2
        own = att.value
        if att.best is not None:
            att.value = att.best[1]
        self.instance.phase1_log.append(
            Phase1Result(self.engine.now, att.started_at, att.ballot, att.value, own)
        )
        msg = Accept(att.ballot, att.value)
        for acc in self._q2_targets:
            self.engine.send(self.node, acc, msg, self._to_acceptor(acc))

    def _phase_deadline(self, att: _Attempt, phase: int) -> None:
        if att.outcome is None and att.phase == phase:
            self._finish(att, Status.TIMED_OUT, phase)

    def _finish(self, att: _Attempt, status: Status, phase: int | None = None) -> None:
        att.phase = 3
        att.outcome = AttemptOutcome(
            att.started_at,
            status,
            self.engine.now,
            att.ballot,
            att.value if status is Status.COMMITTED else None,
            phase,
        )
        del self._open[att.ballot]
        self.attempts.append(att.outcome)
        if att.on_done is not None:
            att.on_done(att.outcome)


def propose(
    engine: Engine,
    proposer_node: NodeId,
    q1: QuorumFamily,
    q2: QuorumFamily,
    value: Any,
    round_budget: float,
    instance: PaxosInstance | None = None,
) -> AttemptOutcome:
    """Run one attempt to completion and return its outcome.

    Other events already queued in ``engine`` are processed along the way.
    """
    if instance is None:
        instance = PaxosInstance(engine, q1.universe | q2.universe)
    done: list[AttemptOutcome] = []
    Proposer(instance, proposer_node, q1, q2).start(value, round_budget, done.append)
    while not done and engine.step():
        pass
    return done[0]
