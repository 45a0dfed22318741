"""Rating location over the social graph.

A lookup fans out to every white-listed partner with a hop budget; receivers
answer from their local store, relay live requests one hop further along
their own white lists, and ignore requests from black-listed senders.
Responses travel the reverse path of the request; every hop that handles a
response stores the carried ratings unless the delivering sender is
black-listed.

Duplicate suppression: an agent handles a given request id once (re-receipts
are dropped) and never forwards to agents already on the hop path, so
propagation terminates regardless of the hop budget.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from disarm.trust import AgentTrustState, DuplicateRatingError, Rating


@dataclass(frozen=True)
class RatingRequest:
    request_id: str
    origin: str
    sender: str
    about: str
    ttl: int
    hop_path: tuple[str, ...]

    def __post_init__(self):
        if self.ttl < 0:
            raise ValueError("ttl must be non-negative")
        if not self.hop_path or self.hop_path[0] != self.origin:
            raise ValueError("hop path must begin at the origin")
        if len(set(self.hop_path)) != len(self.hop_path):
            raise ValueError("hop path must not revisit an agent")


@dataclass(frozen=True)
class RatingResponse:
    request_id: str
    sender: str
    ratings: tuple[Rating, ...]


class ExchangeAgent:
    """Protocol bookkeeping around one agent's trust state."""

    def __init__(self, state: AgentTrustState):
        self.state = state
        self._counter = itertools.count(1)
        self._seen: set[str] = set()
        self._upstream: dict[str, str] = {}
        self._collected: dict[str, dict[str, Rating]] = {}
        self.last_request_id: str | None = None
        self.unknown_responses = 0
        self.duplicate_payload_conflicts = 0

    @property
    def agent_id(self) -> str:
        return self.state.self_id

    # -- origination --------------------------------------------------------

    def initiate_request(self, about: str, ttl_limit: int
                         ) -> list[tuple[str, RatingRequest]]:
        """One request per current white-list member, each with the full hop
        budget, paired with its receiver.  All share one request id (kept in
        ``last_request_id``) for later collection; empty white list, no
        requests."""
        if ttl_limit < 0:
            raise ValueError("ttl_limit must be non-negative")
        request_id = f"{self.agent_id}#{next(self._counter)}"
        self._collected[request_id] = {}
        self.last_request_id = request_id
        req = RatingRequest(request_id, self.agent_id, self.agent_id, about,
                            ttl_limit, (self.agent_id,))
        return [(receiver, req) for receiver in sorted(self.state.whitelist)]

    # -- handlers -----------------------------------------------------------

    def handle_request(self, req: RatingRequest
                       ) -> tuple[list[RatingResponse], list[tuple[str, RatingRequest]]]:
        """Answer and/or relay one delivered request.

        Returns (responses, forwards) where forwards pair the receiver with
        the decremented request.  A request from a black-listed sender is
        ignored outright; a re-received request id is a no-op.
        """
        if req.sender in self.state.blacklist:
            return [], []
        if req.request_id in self._seen:
            return [], []
        self._seen.add(req.request_id)
        self._upstream[req.request_id] = req.sender

        responses = []
        matching = sorted(self.state.ratings_about(req.about), key=lambda r: r.id)
        if matching:
            responses.append(RatingResponse(req.request_id, self.agent_id,
                                            tuple(matching)))
        forwards = []
        if req.ttl > 0:
            blocked = set(req.hop_path)
            for receiver in sorted(self.state.whitelist):
                if receiver in blocked or receiver in self.state.blacklist:
                    continue
                forwards.append((receiver, RatingRequest(
                    req.request_id, req.origin, self.agent_id, req.about,
                    req.ttl - 1, req.hop_path + (self.agent_id,))))
        return responses, forwards

    def handle_response(self, resp: RatingResponse) -> list[tuple[str, RatingResponse]]:
        """Store the carried ratings (unless the sender is black-listed) and
        relay the response one hop toward the origin when this agent was a
        forwarder.  Returns the relays to emit."""
        if resp.sender in self.state.blacklist:
            return []
        if (resp.request_id not in self._collected
                and resp.request_id not in self._upstream):
            self.unknown_responses += 1
            return []
        for rating in resp.ratings:
            try:
                self.state.record_rating(rating, provenance=(resp.sender,))
            except DuplicateRatingError:
                self.duplicate_payload_conflicts += 1
        if resp.request_id in self._collected:
            bucket = self._collected[resp.request_id]
            for rating in resp.ratings:
                bucket.setdefault(rating.id, rating)
            return []
        upstream = self._upstream[resp.request_id]
        return [(upstream, RatingResponse(resp.request_id, self.agent_id,
                                          resp.ratings))]

    def collected(self, request_id: str) -> frozenset[Rating]:
        if request_id not in self._collected:
            raise KeyError(f"request {request_id} was not initiated here")
        return frozenset(self._collected[request_id].values())


@dataclass
class TraceEntry:
    round: int
    kind: str  # request | response
    sender: str
    receiver: str
    about: str
    ttl: int


class SimNetwork:
    """Synchronous in-memory messaging: everything sent during round k is
    delivered at round k+1, in send order.  Exactly-once, no loss."""

    def __init__(self, agents: dict[str, ExchangeAgent], tracing: bool = False):
        self.agents = agents
        self.round = 0
        self.pending: list[tuple[str, str, object]] = []
        self.tracing = tracing
        self.trace: list[TraceEntry] = []
        self.delivered_per_round: list[int] = []

    def send_request(self, receiver: str, req: RatingRequest) -> None:
        self.pending.append((req.sender, receiver, req))

    def send_response(self, sender: str, receiver: str, resp: RatingResponse) -> None:
        self.pending.append((sender, receiver, resp))

    def initiate(self, origin: str, about: str, ttl_limit: int) -> str:
        agent = self.agents[origin]
        for receiver, req in agent.initiate_request(about, ttl_limit):
            self.send_request(receiver, req)
        return agent.last_request_id

    def step(self) -> int:
        """Deliver one round of messages, queuing whatever the handlers emit
        for the next round.  Returns the number delivered."""
        batch, self.pending = self.pending, []
        self.round += 1
        for sender, receiver, msg in batch:
            agent = self.agents[receiver]
            if isinstance(msg, RatingRequest):
                if self.tracing:
                    self.trace.append(TraceEntry(self.round, "request", sender,
                                                 receiver, msg.about, msg.ttl))
                responses, forwards = agent.handle_request(msg)
                for resp in responses:
                    self.send_response(receiver, msg.sender, resp)
                for fwd_receiver, fwd in forwards:
                    self.send_request(fwd_receiver, fwd)
            else:
                if self.tracing:
                    self.trace.append(TraceEntry(self.round, "response", sender,
                                                 receiver, "", -1))
                for relay_receiver, relay in agent.handle_response(msg):
                    self.send_response(receiver, relay_receiver, relay)
        self.delivered_per_round.append(len(batch))
        return len(batch)

    def collect(self, origin: str, request_id: str, rounds_budget: int
                ) -> frozenset[Rating]:
        """Synchronous gather: run the network for a round budget and return
        everything received for the request, deduplicated by id."""
        for _ in range(rounds_budget):
            self.step()
        return self.agents[origin].collected(request_id)
