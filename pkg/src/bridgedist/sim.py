"""Seeded, synchronous simulation of users, censor and distributor(s).

One *tick* of :func:`run_trial` is: scripted churn, round advance and
delivery, corruption, blocking, then a metrics snapshot.  A trial ends at
fallback, when no instance is over its threshold and no corruption is still
scheduled, or at the round cap.
"""

from __future__ import annotations

import csv
import hashlib
import math
import random
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .adversary import (
    DISTRIBUTOR_BEHAVIORS,
    Adversary,
    Prudent,
    parse_strategy,
    strategy_label,
)
from .distribution import BridgeSupply, Session
from .distributors import (
    BridgeRegistry,
    DecentralizedDistribution,
    LeaderBasedDistribution,
    fault_bound,
    make_distributors,
    user_party,
    user_reconstruct,
)
from .messages import Network
from .sharing import SharingPolicy

MODES = ("basic", "leader", "decentralized")
CSV_COLUMNS = ("round", "thirsty", "distributed", "blocked", "used", "msgs_user", "msgs_dist")


class ConfigInvalid(ValueError):
    pass


class IoFailure(OSError):
    pass


class ContractViolation(AssertionError):
    """A simulation invariant failed; the run cannot be trusted."""


def latency_bound(t: int) -> int:
    """Rounds the prudent censor can force with ``t`` users: ceil(log2 ceil((t+1)/32)) + 1."""
    return math.ceil(math.log2(math.ceil((t + 1) / 32))) + 1


def cost_bound(t: int, n: int) -> float:
    return (10 * t + 96) * math.log2(n)


def derive_seed(master: int, k: int) -> int:
    """Seed of trial ``k``: first 8 bytes of SHA-256(master || k)."""
    h = hashlib.sha256(int(master).to_bytes(8, "big") + int(k).to_bytes(8, "big")).digest()
    return int.from_bytes(h[:8], "big")


@dataclass(frozen=True)
class SimConfig:
    n: int
    t: int = 0
    m: int = 1
    mode: str = "basic"
    strategy: Any = field(default_factory=Prudent)
    seed: int = 0
    max_rounds: int | None = None
    churn_schedule: tuple = ()
    trials: int = 1
    corrupt_distributors: int = 0
    distributor_behavior: str = "garbage"
    corruption_schedule: Mapping[int, int] | None = None
    check_invariants: bool = True
    verify_delivery: bool = True

    def __post_init__(self):
        if isinstance(self.strategy, str):
            try:
                object.__setattr__(self, "strategy", parse_strategy(self.strategy))
            except ValueError as exc:
                raise ConfigInvalid(str(exc)) from None
        mode = str(self.mode).lower()
        mode = {"leaderbased": "leader", "leader-based": "leader"}.get(mode, mode)
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "churn_schedule", tuple(tuple(c) for c in self.churn_schedule))
        if mode not in MODES:
            raise ConfigInvalid(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n < 1:
            raise ConfigInvalid("need at least one user")
        if not 0 <= self.t < self.n:
            raise ConfigInvalid(f"need 0 <= t < n, got t={self.t}, n={self.n}")
        if self.m < 1:
            raise ConfigInvalid("need m >= 1")
        if mode == "basic" and self.m != 1:
            raise ConfigInvalid("basic mode runs a single distributor (m = 1)")
        if mode == "decentralized" and self.m < 4:
            raise ConfigInvalid("decentralized mode needs m >= 4")
        if mode != "basic" and self.corrupt_distributors > fault_bound(self.m):
            raise ConfigInvalid(f"at most {fault_bound(self.m)} of {self.m} distributors may be corrupt")
        if self.corrupt_distributors < 0 or (mode == "basic" and self.corrupt_distributors):
            raise ConfigInvalid("corrupt distributors need a multi-distributor mode")
        if self.distributor_behavior not in DISTRIBUTOR_BEHAVIORS:
            raise ConfigInvalid(f"unknown distributor behaviour {self.distributor_behavior!r}")
        if self.trials < 1:
            raise ConfigInvalid("need at least one trial")
        if self.max_rounds is not None and self.max_rounds < 1:
            raise ConfigInvalid("max_rounds must be positive")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigInvalid("seed must fit in 64 bits")
        if self.corruption_schedule is not None:
            if sum(self.corruption_schedule.values()) > self.t:
                raise ConfigInvalid("corruption schedule exceeds the budget t")
        for entry in self.churn_schedule:
            if len(entry) != 3 or entry[1] not in ("join", "leave") or entry[2] < 0:
                raise ConfigInvalid(f"bad churn entry {entry!r}; want (tick, 'join'|'leave', count)")

    @property
    def round_cap(self) -> int:
        if self.max_rounds is not None:
            return self.max_rounds
        return 2 * latency_bound(self.t) + 4

    @classmethod
    def from_dict(cls, data: Mapping) -> SimConfig:
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigInvalid(f"unknown config keys {sorted(extra)}")
        data = dict(data)
        if "corruption_schedule" in data and data["corruption_schedule"] is not None:
            data["corruption_schedule"] = {int(k): v for k, v in data["corruption_schedule"].items()}
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigInvalid(str(exc)) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["strategy"] = strategy_label(self.strategy)
        return d


@dataclass(frozen=True)
class RoundRecord:
    round: int
    thirsty: int
    distributed: int
    blocked: int
    used: int
    msgs_user: int
    msgs_dist: int
    msgs_user_min: int = 0


@dataclass
class MetricsSeries:
    records: list[RoundRecord] = field(default_factory=list)
    latency_rounds: int = 0
    success: bool = False
    capped: bool = False
    seed: int = 0
    drg_restarts: int = 0

    @property
    def bridges_used(self) -> int:
        return self.records[-1].used if self.records else 0

    @property
    def thirsty_final(self) -> int:
        return self.records[-1].thirsty if self.records else 0


# -- one trial -------------------------------------------------------------------------


class _Basic:
    """Single distributor; one message per user per distribution."""

    def __init__(self, users, rng):
        self.session = Session(users, BridgeSupply(), rng)
        self.network = None

    def step(self):
        return self.session.advance_round_if_triggered()

    def report_blocked(self, ids):
        return self.session.report_blocked(ids)


def _build_driver(cfg: SimConfig, users, seed: int):
    session_rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    if cfg.mode == "basic":
        return _Basic(users, session_rng)
    corrupt = {cfg.m - k: cfg.distributor_behavior for k in range(cfg.corrupt_distributors)}
    nodes = make_distributors(cfg.m, corrupt, seed=seed)
    network = Network()
    registry = BridgeRegistry(nodes, SharingPolicy(cfg.m), random.Random(f"{seed}:registry"), network)
    if cfg.mode == "leader":
        driver = LeaderBasedDistribution(nodes, registry, users, session_rng, network)
    else:
        driver = DecentralizedDistribution(nodes, registry, users, network,
                                           rng=random.Random(f"{seed}:agreement"))
    driver.nodes = nodes
    return driver


def _replicas(driver) -> list[Session]:
    if hasattr(driver, "honest"):
        return [n.session for n in driver.honest]
    return [driver.session]


def _apply_churn(cfg: SimConfig, driver, tick: int, next_user: list, rng, adversary):
    sessions = _replicas(driver)
    for when, kind, count in cfg.churn_schedule:
        if when != tick:
            continue
        if kind == "join":
            for _ in range(count):
                for s in sessions:
                    s.join_user(next_user[0])
                next_user[0] += 1
        else:
            honest = [u for u in sessions[0].users if u not in adversary.corrupted]
            for i in sorted(rng.choice(len(honest), size=min(count, len(honest)), replace=False)):
                for s in sessions:
                    s.leave_user(honest[i])


def _check_delivery(driver, session: Session, honest_users: Sequence):
    policy = driver.registry.policy
    for u in honest_users:
        got = user_reconstruct(driver.inbox.get(u, []), policy)
        expect = session.assignments_for(u)
        for sid in expect:
            if got.get(sid) != driver.registry.address_of(sid):
                raise ContractViolation(f"user {u} reconstructed the wrong address for bridge {sid}")


def run_trial(cfg: SimConfig, seed: int | None = None, on_round=None) -> MetricsSeries:
    """Run one trial; ``seed`` overrides ``cfg.seed``.

    ``on_round(driver, record)`` is called after every tick, e.g. to inspect
    distributor state.
    """
    seed = cfg.seed if seed is None else seed
    users = list(range(cfg.n))
    driver = _build_driver(cfg, users, seed)
    session = driver.session
    adv_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    churn_rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    adversary = Adversary(cfg.t, cfg.strategy, schedule=cfg.corruption_schedule)
    out = MetricsSeries(seed=seed)
    next_user = [cfg.n]
    network = driver.network
    check = cfg.check_invariants
    last_used = 0

    for tick in range(1, cfg.round_cap + 1):
        if network is not None:
            network.reset()
        _apply_churn(cfg, driver, tick, next_user, churn_rng, adversary)
        blocked_before = set(session.supply.blocked) if check else None
        plan = driver.step()
        session = driver.session
        if check and plan is not None:
            for inst in session.instances if not session.fallback else ():
                if session.supply.blocked_mask(inst.pool).any():
                    raise ContractViolation("a freshly distributed pool contains a blocked bridge")
        honest = [u for u in session.users if u not in adversary.corrupted]
        delivered = plan is not None
        if check and delivered and network is not None and cfg.verify_delivery:
            _check_delivery(driver, session, honest)

        adversary.corrupt_step(session, adv_rng, tick)
        blocks = adversary.decide_blocks(session, adv_rng)
        if check:
            _check_blocks(session, adversary, blocks)
        driver.report_blocked(sorted(blocks))
        if check and session.fallback and blocks and network is not None and cfg.verify_delivery:
            _check_delivery(driver, session, [u for u in session.users if u not in adversary.corrupted])

        out.records.append(_snapshot(session, adversary, network, delivered, tick))
        if check:
            if out.records[-1].used < last_used:
                raise ContractViolation("bridges_used decreased")
            if len(adversary.corrupted) > cfg.t:
                raise ContractViolation("corrupted more users than the budget")
            if blocked_before is not None and not (session.supply.blocked - blocked_before) <= adversary.known:
                raise ContractViolation("a bridge was blocked without being learned")
        last_used = out.records[-1].used
        if on_round is not None:
            on_round(driver, out.records[-1])
        if session.fallback:
            break
        if not session.triggered() and not adversary.pending(tick):
            break
    else:
        out.capped = session.triggered() or adversary.pending(cfg.round_cap)

    out.latency_rounds = session.round
    out.success = out.thirsty_final == 0 and not out.capped
    out.drg_restarts = getattr(driver, "restarts", 0)
    return out


def _check_blocks(session: Session, adversary: Adversary, blocks: set):
    if not blocks <= adversary.known:
        raise ContractViolation("censor blocked a bridge it never learned")
    if isinstance(adversary.strategy, Prudent) and blocks and not session.fallback:
        cap = len(adversary.corrupted)
        ids = np.fromiter(blocks, dtype=np.int64)
        for inst in session.instances:
            if np.isin(inst.pool, ids).sum() > cap:
                raise ContractViolation("prudent censor blocked more than one bridge per corrupt user")


def _snapshot(session: Session, adversary: Adversary, network: Network | None,
              delivered: bool, tick: int) -> RoundRecord:
    slots = session.alive_slots()
    corrupt = set(adversary.corrupt_slots(session).tolist())
    honest_slots = np.array([s for s in slots.tolist() if s not in corrupt], dtype=np.int64)
    thirsty = int((~session.has_unblocked(honest_slots)).sum()) if len(honest_slots) else 0
    if session.fallback:
        distributed = len(slots)
    else:
        distributed = sum(inst.d for inst in session.instances)
    if network is None:
        n_alive = len(slots)
        mu = mu_min = 1 if delivered else 0
        md = n_alive if delivered else 0
    else:
        users = session._slots.users
        counts = [network.received[user_party(users[s])] for s in honest_slots.tolist()]
        mu = max(counts, default=0)
        mu_min = min(counts, default=0)
        dist = [p for p in set(network.sent) | set(network.received) if p[0] == "D"]
        md = max((network.total(p) for p in dist), default=0)
    return RoundRecord(
        round=session.round,
        thirsty=thirsty,
        distributed=distributed,
        blocked=len(session.supply.blocked),
        used=session.bridges_used,
        msgs_user=mu,
        msgs_dist=md,
        msgs_user_min=mu_min,
    )


# -- experiments -------------------------------------------------------------------


def run_experiment(configs: Iterable[SimConfig], trials: int | None = None) -> list[dict]:
    """Mean/min/max of the terminal metrics of every config over its trials.

    Trial ``k`` of a config runs with ``derive_seed(config.seed, k)``.
    """
    table = []
    for cfg in configs:
        k_trials = trials or cfg.trials
        runs = [run_trial(cfg, derive_seed(cfg.seed, k)) for k in range(k_trials)]
        row: dict[str, Any] = {
            "n": cfg.n, "t": cfg.t, "m": cfg.m, "mode": cfg.mode,
            "strategy": strategy_label(cfg.strategy), "trials": k_trials,
            "successes": sum(r.success for r in runs),
        }
        metrics = {
            "round": [r.latency_rounds for r in runs],
            "thirsty": [r.thirsty_final for r in runs],
            "distributed": [r.records[-1].distributed for r in runs],
            "blocked": [r.records[-1].blocked for r in runs],
            "used": [r.bridges_used for r in runs],
            "msgs_user": [max(x.msgs_user for x in r.records) for r in runs],
            "msgs_dist": [max(x.msgs_dist for x in r.records) for r in runs],
        }
        for name, vals in metrics.items():
            row[f"{name}_mean"] = float(np.mean(vals))
            row[f"{name}_min"] = int(min(vals))
            row[f"{name}_max"] = int(max(vals))
        row["runs"] = runs
        table.append(row)
    return table


def emit_csv(data: MetricsSeries | Sequence[dict], destination) -> None:
    """Write a series (one row per round) or a table (one row per sweep point).

    Table rows carry the sweep keys and, for each metric, its worst case
    (max) over the trials, so every number stays an integer.
    """
    if isinstance(data, MetricsSeries):
        header = list(CSV_COLUMNS)
        rows = [[getattr(r, c) for c in CSV_COLUMNS] for r in data.records]
    else:
        header = ["n", "t", "m", "mode", "strategy", "trials", "successes", *CSV_COLUMNS]
        rows = [[row[k] for k in header[:7]] + [row[f"{c}_max"] for c in CSV_COLUMNS] for row in data]
    try:
        if hasattr(destination, "write"):
            _write(destination, header, rows)
        else:
            with open(destination, "w", newline="") as fh:
                _write(fh, header, rows)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def _write(fh, header, rows):
    w = csv.writer(fh, lineterminator="\r\n")
    w.writerow(header)
    w.writerows(rows)


def sweep_configs(spec: Mapping) -> list[SimConfig]:
    """Expand ``{"base": {...}, "grid": {"t": [...], ...}}`` into configs.

    A plain list of config objects is also accepted.
    """
    if isinstance(spec, list):
        return [SimConfig.from_dict(d) for d in spec]
    base = dict(spec.get("base", {}))
    grid = spec.get("grid", {})
    configs = [base]
    for key, values in grid.items():
        if isinstance(values, Mapping) and {"start", "stop"} <= set(values):
            values = list(range(values["start"], values["stop"], values.get("step", 1)))
        configs = [{**c, key: v} for c in configs for v in values]
    return [SimConfig.from_dict(c) for c in configs]
