"""Deterministic multi-agent testbed.

One service, many providers with distinct quality profiles, consumers that
pick a provider each round using their trust policy, rate the interaction
honestly, and exchange witness ratings over their white-list edges.  The
utility gained per interaction (UG in [0, 10]) tracks the provider's
performance, so policy quality shows up directly in mean UG.

Every random draw comes from a stream keyed by (master seed, purpose,
agents, round), so runs are reproducible byte for byte and one policy's
presence never perturbs another's provider-side draws.

Providers rate their consumers back with a fixed courtesy profile.  Those
ratings never enter provider estimates (their trustee is a consumer), but
they populate provider white lists, which is what lets rating requests hop
provider -> consumer and reach witnesses.
"""

from __future__ import annotations

import csv
import io
import random
import statistics
from dataclasses import dataclass, field, replace

from disarm.estimator import (
    Category,
    EstimationConfig,
    ReputationReport,
    estimate_reputation,
)
from disarm.exchange import ExchangeAgent, SimNetwork
from disarm.trust import COEFFICIENTS, AgentTrustState, Rating, Thresholds

PROVIDER_CLASSES = ("good", "ordinary", "intermittent", "bad")

#: per-class (mean, spread); intermittent draws uniformly over the full range
PROFILE_PARAMS = {
    "good": (8.5, 1.0),
    "ordinary": (5.5, 1.5),
    "bad": (2.0, 1.5),
}

POLICIES = ("disarm_t1", "disarm_t2", "disarm_t3", "direct", "none")

#: policies that run the full trust machinery (lists, estimates)
TRUST_POLICIES = ("disarm_t1", "disarm_t2", "disarm_t3", "direct")

#: policies that gather witness ratings over the network
WITNESS_POLICIES = ("disarm_t1", "disarm_t2", "disarm_t3")

POLICY_THEORY = {"disarm_t1": "t1", "disarm_t2": "t2", "disarm_t3": "t3",
                 "direct": "t2"}

SCORE_MIN, SCORE_MAX = 0.1, 10.0


@dataclass(frozen=True)
class ProviderProfile:
    klass: str
    means: dict[str, float]
    spreads: dict[str, float]

    @staticmethod
    def of(klass: str) -> "ProviderProfile":
        if klass == "intermittent":
            return ProviderProfile(klass, {c: 5.05 for c in COEFFICIENTS},
                                   {c: 0.0 for c in COEFFICIENTS})
        mean, spread = PROFILE_PARAMS[klass]
        return ProviderProfile(klass, {c: mean for c in COEFFICIENTS},
                               {c: spread for c in COEFFICIENTS})


def provider_perform(profile: ProviderProfile, rng: random.Random
                     ) -> tuple[dict[str, float], float]:
    """Draw one interaction's performance.  Good/ordinary/bad providers draw
    uniformly within mean +- spread clamped to [0.1, 10]; intermittent ones
    cover the whole range.  UG is the mean of the six scores rescaled to
    [0, 1], times 10."""
    scores = {}
    for coeff in COEFFICIENTS:
        if profile.klass == "intermittent":
            v = rng.uniform(SCORE_MIN, SCORE_MAX)
        else:
            mean, spread = profile.means[coeff], profile.spreads[coeff]
            v = rng.uniform(mean - spread, mean + spread) if spread else mean
        scores[coeff] = min(SCORE_MAX, max(SCORE_MIN, v))
    ug = sum((s - SCORE_MIN) / (SCORE_MAX - SCORE_MIN) for s in scores.values())
    return scores, ug / len(scores) * 10.0


def rate_interaction(consumer: str, provider: str, performance: dict[str, float],
                     round_no: int, rating_id: str, confidence: float,
                     transaction_value: float) -> Rating:
    """Honest rating: coefficients equal the observed performance, timestamp
    is the round."""
    return Rating(id=rating_id, truster=consumer, trustee=provider, t=round_no,
                  confidence=confidence, transaction_value=transaction_value,
                  **performance)


@dataclass(frozen=True)
class SimConfig:
    n_providers: int = 40
    class_densities: dict[str, float] = field(default_factory=lambda: {
        "good": 0.15, "ordinary": 0.30, "intermittent": 0.15, "bad": 0.40})
    consumers_per_policy: int = 7
    policies: tuple[str, ...] = POLICIES
    rounds: int = 200
    seed: int = 0
    ttl_limit: int = 2
    interactions_per_round: int = 1
    witness_request_period: int = 1
    #: stop asking about a provider once this many ratings about it are held
    witness_sufficiency: int = 25
    thresholds: Thresholds = field(default_factory=Thresholds)
    weights: dict[str, float] | None = None
    social_weights: dict[Category, float] | None = None
    rating_confidence: float = 0.9
    rating_transaction_value: float = 0.8
    courtesy_score: float = 8.0
    event_window: int = 8

    def validate(self) -> None:
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if self.n_providers < 1:
            raise ValueError("need at least one provider")
        if self.consumers_per_policy < 1:
            raise ValueError("need at least one consumer per policy")
        if set(self.class_densities) != set(PROVIDER_CLASSES):
            raise ValueError(f"class densities must cover {PROVIDER_CLASSES}")
        if abs(sum(self.class_densities.values()) - 1.0) > 1e-9:
            raise ValueError("class densities must sum to 1")
        unknown = set(self.policies) - set(POLICIES)
        if unknown:
            raise ValueError(f"unknown policies: {sorted(unknown)}")
        if self.ttl_limit < 0:
            raise ValueError("ttl_limit must be non-negative")
        if self.interactions_per_round < 1:
            raise ValueError("interactions_per_round must be at least 1")


@dataclass
class RoundLog:
    round: int
    choices: dict[str, tuple[str, float]]            # consumer -> (provider, UG)
    policy_ug: dict[str, list[float]]                # policy -> UGs this round
    stored: dict[str, int]                           # consumer -> stored ratings
    messages: int
    centralized_count: int


def _class_counts(n: int, densities: dict[str, float]) -> dict[str, int]:
    counts = {k: int(n * densities[k]) for k in PROVIDER_CLASSES}
    remainders = sorted(PROVIDER_CLASSES,
                        key=lambda k: (n * densities[k]) - counts[k], reverse=True)
    i = 0
    while sum(counts.values()) < n:
        counts[remainders[i % len(remainders)]] += 1
        i += 1
    return counts


class _Consumer:
    def __init__(self, name: str, policy: str, cfg: SimConfig):
        self.name = name
        self.policy = policy
        self.rng = None  # bound by the simulation (seeded per consumer)
        state = AgentTrustState(name, thresholds=cfg.thresholds,
                                event_window=cfg.event_window)
        self.agent = ExchangeAgent(state)
        self.rating_no = 0
        if policy in TRUST_POLICIES:
            weights = cfg.weights or None
            social = cfg.social_weights or None
            kwargs = {"theory": POLICY_THEORY[policy],
                      "confidence_threshold": cfg.thresholds.confidence,
                      "transaction_value_threshold": cfg.thresholds.transaction_value}
            if weights:
                kwargs["weights"] = weights
            if social:
                kwargs["social_weights"] = social
            self.estimation = EstimationConfig(**kwargs)
        else:
            self.estimation = None
        self._report_cache: dict[str, tuple[int, ReputationReport | None]] = {}

    @property
    def state(self) -> AgentTrustState:
        return self.agent.state

    def bump_lists(self) -> None:
        self._report_cache.clear()

    def report_for(self, provider: str, now: int) -> ReputationReport | None:
        # the store is append-only, so the pool size is a valid cache version
        version = len(self.state.ratings_about(provider))
        cached = self._report_cache.get(provider)
        if cached is not None and cached[0] == version:
            return cached[1]
        report = estimate_reputation(
            self.name, self.state.known_agents(), self.state.whitelist,
            self.state.blacklist, self.state.ratings_about(provider),
            self.state.thresholds, self.estimation, now)
        self._report_cache[provider] = (version, report)
        return report


class _Provider:
    def __init__(self, name: str, profile: ProviderProfile, cfg: SimConfig):
        self.name = name
        self.profile = profile
        state = AgentTrustState(name, thresholds=cfg.thresholds,
                                event_window=cfg.event_window)
        self.agent = ExchangeAgent(state)
        self.rating_no = 0

    @property
    def state(self) -> AgentTrustState:
        return self.agent.state


class Simulation:
    def __init__(self, cfg: SimConfig):
        cfg.validate()
        self.cfg = cfg
        counts = _class_counts(cfg.n_providers, cfg.class_densities)
        self.providers: dict[str, _Provider] = {}
        for klass in PROVIDER_CLASSES:
            for i in range(counts[klass]):
                name = f"{klass}_{i}"
                self.providers[name] = _Provider(name, ProviderProfile.of(klass), cfg)
        self.consumers: dict[str, _Consumer] = {}
        for policy in cfg.policies:
            for i in range(cfg.consumers_per_policy):
                name = f"{policy}_{i}"
                self.consumers[name] = _Consumer(name, policy, cfg)
        for consumer in self.consumers.values():
            consumer.rng = random.Random(f"{cfg.seed}:decide:{consumer.name}")
        agents = {name: p.agent for name, p in self.providers.items()}
        agents.update({name: c.agent for name, c in self.consumers.items()})
        self.network = SimNetwork(agents)
        self.provider_names = sorted(self.providers)
        self.total_ratings = 0
        self.logs: list[RoundLog] = []

    # -- helpers -------------------------------------------------------------

    def _perform_rng(self, provider: str, round_no: int, consumer: str,
                     k: int) -> random.Random:
        return random.Random(
            f"{self.cfg.seed}:perform:{provider}:{round_no}:{consumer}:{k}")

    def _select_provider(self, consumer: _Consumer, round_no: int) -> str:
        names = self.provider_names
        if consumer.policy == "none":
            return consumer.rng.choice(names)
        candidates = [p for p in names if p not in consumer.state.blacklist]
        if not candidates:
            candidates = names
        scored: list[tuple[float, float, str]] = []
        for p in candidates:
            report = consumer.report_for(p, round_no)
            if report is not None:
                scored.append((report.value, -(report.sigma or 0.0), p))
        if not scored:
            return consumer.rng.choice(candidates)
        best = max(scored, key=lambda t: (t[0], t[1]))
        tied = [p for v, ns, p in scored if (v, ns) == (best[0], best[1])]
        return tied[0] if len(tied) == 1 else consumer.rng.choice(tied)

    def _interact(self, consumer: _Consumer, provider_name: str,
                  round_no: int, k: int) -> float:
        provider = self.providers[provider_name]
        rng = self._perform_rng(provider_name, round_no, consumer.name, k)
        performance, ug = provider_perform(provider.profile, rng)

        consumer.rating_no += 1
        rating = rate_interaction(
            consumer.name, provider_name, performance, round_no,
            f"{consumer.name}_{consumer.rating_no}",
            self.cfg.rating_confidence, self.cfg.rating_transaction_value)
        self.total_ratings += 1
        if consumer.policy in TRUST_POLICIES:
            before = (consumer.state.whitelist, consumer.state.blacklist)
            consumer.state.observe_own_rating(rating, at=round_no)
            if (consumer.state.whitelist, consumer.state.blacklist) != before:
                consumer.bump_lists()
        else:
            consumer.state.record_rating(rating)

        # courtesy rating back: constant scores, keeps provider white lists
        # pointing at the consumers they serve
        provider.rating_no += 1
        back = Rating(
            id=f"{provider_name}_{provider.rating_no}", truster=provider_name,
            trustee=consumer.name, t=round_no,
            confidence=self.cfg.rating_confidence,
            transaction_value=self.cfg.rating_transaction_value,
            **{c: self.cfg.courtesy_score for c in COEFFICIENTS})
        self.total_ratings += 1
        provider.state.observe_own_rating(back, at=round_no)
        return ug

    # -- rounds ---------------------------------------------------------------

    def run(self) -> list[RoundLog]:
        cfg = self.cfg
        for round_no in range(1, cfg.rounds + 1):
            messages = self.network.step()

            choices: dict[str, tuple[str, float]] = {}
            policy_ug: dict[str, list[float]] = {p: [] for p in cfg.policies}
            for idx, name in enumerate(sorted(self.consumers)):
                consumer = self.consumers[name]
                if (consumer.policy in WITNESS_POLICIES
                        and (round_no - 1) % cfg.witness_request_period == 0):
                    # staggered round-robin; skip once the local pool is rich
                    target = self.provider_names[
                        (round_no - 1 + idx) % len(self.provider_names)]
                    if (len(consumer.state.ratings_about(target))
                            < cfg.witness_sufficiency):
                        self.network.initiate(name, target, cfg.ttl_limit)
                for k in range(cfg.interactions_per_round):
                    provider_name = self._select_provider(consumer, round_no)
                    ug = self._interact(consumer, provider_name, round_no, k)
                    choices[name] = (provider_name, ug)
                    policy_ug[consumer.policy].append(ug)

            stored = {name: len(c.state.ratings)
                      for name, c in sorted(self.consumers.items())}
            self.logs.append(RoundLog(round_no, choices, policy_ug, stored,
                                      messages, self.total_ratings))
        return self.logs


def run_simulation(cfg: SimConfig) -> list[RoundLog]:
    return Simulation(cfg).run()


# ---------------------------------------------------------------------------
# Metrics and report files
# ---------------------------------------------------------------------------

def storage_metrics(logs: list[RoundLog], policies: tuple[str, ...] = POLICIES
                    ) -> list[dict]:
    """Per-round, per-policy stored-rating statistics against the synthetic
    centralized counter."""
    rows = []
    for log in logs:
        for policy in policies:
            counts = [n for name, n in log.stored.items()
                      if name.rsplit("_", 1)[0] == policy]
            rows.append({
                "round": log.round,
                "policy": policy,
                "mean_stored": sum(counts) / len(counts) if counts else 0.0,
                "max_stored": max(counts) if counts else 0,
                "centralized_count": log.centralized_count,
            })
    return rows


def ug_rows(logs: list[RoundLog], policies: tuple[str, ...] = POLICIES) -> list[dict]:
    rows = []
    for log in logs:
        for policy in policies:
            ugs = log.policy_ug.get(policy, [])
            mean = sum(ugs) / len(ugs) if ugs else 0.0
            std = statistics.pstdev(ugs) if len(ugs) > 1 else 0.0
            rows.append({"round": log.round, "policy": policy,
                         "mean_ug": mean, "stddev_ug": std})
    return rows


def message_rows(logs: list[RoundLog]) -> list[dict]:
    return [{"round": log.round, "count": log.messages} for log in logs]


def _csv_text(rows: list[dict], header: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row[k]) for k in header})
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def write_reports(logs: list[RoundLog], out_dir, policies=POLICIES) -> dict[str, str]:
    """Write ug.csv, storage.csv, and messages.csv; returns path -> text."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "ug.csv": _csv_text(ug_rows(logs, policies),
                            ["round", "policy", "mean_ug", "stddev_ug"]),
        "storage.csv": _csv_text(storage_metrics(logs, policies),
                                 ["round", "policy", "mean_stored",
                                  "max_stored", "centralized_count"]),
        "messages.csv": _csv_text(message_rows(logs), ["round", "count"]),
    }
    for name, text in files.items():
        (out / name).write_text(text)
    return files


def policy_means(logs: list[RoundLog], policies=POLICIES) -> dict[str, float]:
    """Mean UG per policy over the whole run."""
    totals = {p: [] for p in policies}
    for log in logs:
        for policy in policies:
            totals[policy].extend(log.policy_ug.get(policy, []))
    return {p: (sum(v) / len(v) if v else 0.0) for p, v in totals.items()}
