"""Single-distributor bridge distribution with a shared round counter.

A :class:`Session` runs ``L = ceil(3 log2 n)`` copies of the threshold
algorithm side by side.  Every copy (an *instance*) hands each user one
uniformly chosen bridge out of its pool of ``2**(i + 4)`` bridges.  As soon as
any instance sees at least ``0.6 * 2**(i + 4)`` of its pool blocked, all of
them move to round ``i + 1`` together and redistribute with twice as many
bridges.  Once a pool would no longer be smaller than ``n / L`` every user
gets a bridge of their own instead and the session stops advancing.

Bridges are plain integer ids handed out by a :class:`BridgeSupply`; in the
multi-distributor setting those ids are pseudonyms of secret-shared addresses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable

import numpy as np

SENTINEL_BLOCKED = 16
GROWTH_INSTANCES = 3


class DistributionError(Exception):
    pass


class EmptyUserSet(DistributionError, ValueError):
    pass


class SupplyExhausted(DistributionError):
    pass


class UnknownUser(DistributionError, KeyError):
    pass


class DuplicateUser(DistributionError, ValueError):
    pass


def instance_count(n: int) -> int:
    """Number of parallel instances for ``n`` users, never below one."""
    if n <= 1:
        return 1
    return max(1, math.ceil(3 * math.log2(n)))


def pool_size(round_no: int) -> int:
    return 2 ** (round_no + 4)


def advance_threshold(round_no: int) -> float:
    return 0.6 * pool_size(round_no)


def crosses_threshold(blocked: int, round_no: int) -> bool:
    # 5*b >= 3*2^(i+4) is b >= 0.6*2^(i+4) without rounding
    return 5 * blocked >= 3 * pool_size(round_no)


def blocks_needed(round_no: int) -> int:
    """Smallest blocked count that triggers the next round."""
    return -(-3 * pool_size(round_no) // 5)


class BridgeSupply:
    """Source of fresh bridge ids, plus the record of which ids are blocked.

    Ids are issued in increasing order starting at 0.  ``limit`` caps how many
    bridges exist at all; ``on_issue`` is told about every batch handed out,
    which is how the multi-distributor registry learns it must register more.
    """

    def __init__(self, limit: int | None = None, on_issue: Callable[[np.ndarray], None] | None = None):
        self.limit = limit
        self.on_issue = on_issue
        self.issued = 0
        self._blocked = np.zeros(256, dtype=bool)

    def fresh(self, k: int) -> np.ndarray:
        if k < 0:
            raise ValueError("negative bridge request")
        # ids blocked before they were ever issued are skipped for good
        ids = np.zeros(0, dtype=np.int64)
        while len(ids) < k:
            want = k - len(ids)
            if self.limit is not None and self.issued + want > self.limit:
                raise SupplyExhausted(
                    f"need {want} fresh bridges, only {self.limit - self.issued} left"
                )
            cand = np.arange(self.issued, self.issued + want, dtype=np.int64)
            self.issued += want
            self._grow(self.issued)
            ids = np.concatenate([ids, cand[~self._blocked[cand]]])
        if self.on_issue is not None and k:
            self.on_issue(ids)
        return ids

    def _grow(self, size: int):
        if size > len(self._blocked):
            new = np.zeros(max(size, 2 * len(self._blocked)), dtype=bool)
            new[: len(self._blocked)] = self._blocked
            self._blocked = new

    def block(self, ids: Iterable[int]):
        ids = np.fromiter((int(b) for b in ids), dtype=np.int64)
        if len(ids):
            self._grow(int(ids.max()) + 1)
            self._blocked[ids] = True

    def blocked_mask(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and int(ids.max()) >= len(self._blocked):
            self._grow(int(ids.max()) + 1)
        return self._blocked[ids]

    def is_blocked(self, bridge: int) -> bool:
        return bridge < len(self._blocked) and bool(self._blocked[bridge])

    @property
    def blocked(self) -> set[int]:
        return set(np.flatnonzero(self._blocked).tolist())


@dataclass
class InstanceState:
    pool: np.ndarray
    blocked_count: int
    # per user slot: index into pool (meaningless for empty/dead slots)
    assignment: np.ndarray

    @property
    def d(self) -> int:
        return len(self.pool)


@dataclass(frozen=True)
class RoundPlan:
    round: int
    d: int
    fallback: bool
    new_bridges: int
    reused_bridges: int = 0


@dataclass
class _Slots:
    index: dict = field(default_factory=dict)
    users: list = field(default_factory=list)
    alive: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


class Session:
    """Distributor-side state of the bridge distribution algorithm.

    ``rng`` is a :class:`numpy.random.Generator`; it is the only source of
    randomness, so a session is reproducible from its seed.  Replicated
    sessions (one per honest distributor) stay in lockstep by swapping in
    identically seeded generators before each call that draws.
    """

    def __init__(self, user_ids: Iterable[Hashable], supply: BridgeSupply, rng: np.random.Generator):
        users = _ordered(user_ids)
        if not users:
            raise EmptyUserSet("a session needs at least one user")
        self.supply = supply
        self.rng = rng
        self.round = 0
        self.fallback = False
        self.bridges_used = 0
        self._slots = _Slots()
        self._capacity = 0
        self._unique = np.zeros(0, dtype=np.int64)
        self.instances: list[InstanceState] = []
        self._ensure_capacity(len(users))
        for u in users:
            self._add_slot(u)
        self._resize_instances(instance_count(len(users)))
        self.growth_base = len(users)

    # -- bookkeeping -------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self._slots.index)

    @property
    def users(self) -> list:
        return [u for u in self._slots.users if u in self._slots.index]

    @property
    def L(self) -> int:
        return len(self.instances)

    def slot_of(self, user) -> int:
        try:
            return self._slots.index[user]
        except KeyError:
            raise UnknownUser(user) from None

    def _ensure_capacity(self, size: int):
        if size <= self._capacity:
            return
        cap = max(size, 2 * self._capacity, 16)
        alive = np.zeros(cap, dtype=bool)
        alive[: self._capacity] = self._slots.alive
        self._slots.alive = alive
        uniq = np.full(cap, -1, dtype=np.int64)
        uniq[: self._capacity] = self._unique
        self._unique = uniq
        for inst in self.instances:
            a = np.zeros(cap, dtype=np.int64)
            a[: self._capacity] = inst.assignment
            inst.assignment = a
        self._capacity = cap

    def _add_slot(self, user) -> int:
        slot = len(self._slots.users)
        self._ensure_capacity(slot + 1)
        self._slots.users.append(user)
        self._slots.index[user] = slot
        self._slots.alive[slot] = True
        return slot

    def _new_instance(self) -> InstanceState:
        return InstanceState(
            pool=np.zeros(0, dtype=np.int64),
            blocked_count=SENTINEL_BLOCKED,
            assignment=np.zeros(self._capacity, dtype=np.int64),
        )

    def _resize_instances(self, count: int):
        while len(self.instances) < count:
            self.instances.append(self._new_instance())
        del self.instances[count:]

    def alive_slots(self) -> np.ndarray:
        return np.flatnonzero(self._slots.alive[: len(self._slots.users)])

    # -- the algorithm -----------------------------------------------------

    def triggered(self) -> bool:
        if self.fallback or not self.instances:
            return False
        return crosses_threshold(max(inst.blocked_count for inst in self.instances), self.round)

    def advance_round_if_triggered(self) -> RoundPlan | None:
        """Move every instance to the next round if any crossed its threshold.

        Returns the plan that was carried out, or None when nothing advanced.
        """
        if not self.triggered():
            return None
        self.round += 1
        d = pool_size(self.round)
        if d * self.L < self.n:
            return self._redistribute(d)
        return self._engage_fallback()

    def _redistribute(self, d: int) -> RoundPlan:
        new = reused = 0
        for inst in self.instances:
            keep = inst.pool[~self.supply.blocked_mask(inst.pool)][:d]
            top = self.supply.fresh(d - len(keep))
            inst.pool = np.concatenate([keep, top])
            inst.blocked_count = 0
            inst.assignment = self.rng.integers(0, d, size=self._capacity, dtype=np.int64)
            new += len(top)
            reused += len(keep)
        self.bridges_used += new
        return RoundPlan(self.round, d, False, new, reused)

    def _engage_fallback(self) -> RoundPlan:
        # Fresh bridges only: a unique bridge must not be known to anyone else.
        slots = self.alive_slots()
        self._unique[slots] = self.supply.fresh(len(slots))
        self.bridges_used += len(slots)
        self.fallback = True
        return RoundPlan(self.round, len(slots), True, len(slots))

    def report_blocked(self, bridge_ids: Iterable[int]) -> int:
        """Record newly blocked bridges and refresh every instance's count.

        In fallback mode a user whose own bridge was blocked is handed a fresh
        one.  Returns the number of replacements made.
        """
        bridge_ids = list(bridge_ids)
        if not bridge_ids:
            return 0
        self.supply.block(bridge_ids)
        for inst in self.instances:
            if inst.d:
                inst.blocked_count = int(self.supply.blocked_mask(inst.pool).sum())
        if not self.fallback:
            return 0
        slots = self.alive_slots()
        hit = slots[self.supply.blocked_mask(self._unique[slots])]
        if len(hit):
            self._unique[hit] = self.supply.fresh(len(hit))
            self.bridges_used += len(hit)
        return len(hit)

    # -- views ---------------------------------------------------------------

    def bridges_of_slots(self, slots: np.ndarray) -> np.ndarray:
        """Bridge ids held by each slot, shape ``(holdings, len(slots))``."""
        slots = np.asarray(slots, dtype=np.int64)
        if self.fallback:
            return self._unique[slots][None, :]
        if self.round == 0:
            return np.zeros((0, len(slots)), dtype=np.int64)
        return np.stack([inst.pool[inst.assignment[slots]] for inst in self.instances])

    def assignments_for(self, user) -> list[int]:
        slot = self.slot_of(user)
        return self.bridges_of_slots(np.array([slot]))[:, 0].tolist()

    def has_unblocked(self, slots: np.ndarray) -> np.ndarray:
        held = self.bridges_of_slots(slots)
        if held.shape[0] == 0:
            return np.zeros(len(slots), dtype=bool)
        return (~self.supply.blocked_mask(held.ravel()).reshape(held.shape)).any(axis=0)

    def assign(self, user, instance: int, k: int):
        """Point ``user`` at pool entry ``k`` of ``instance`` (0-based)."""
        inst = self.instances[instance]
        if not 0 <= k < inst.d:
            raise IndexError(f"pool index {k} outside [0, {inst.d})")
        inst.assignment[self.slot_of(user)] = k

    # -- churn ---------------------------------------------------------------

    def join_user(self, user) -> None:
        if user in self._slots.index:
            raise DuplicateUser(user)
        slot = self._add_slot(user)
        if self.fallback:
            self._unique[slot] = self.supply.fresh(1)[0]
            self.bridges_used += 1
        elif self.round > 0:
            for inst in self.instances:
                inst.assignment[slot] = self.rng.integers(0, inst.d)
        if self.n >= 2 * self.growth_base:
            self.handle_growth()

    def handle_growth(self) -> int:
        """Add three instances once ``n`` has doubled; returns instances added."""
        if self.n < 2 * self.growth_base:
            return 0
        self.growth_base = self.n
        if self.fallback:
            return 0
        if self.round == 0:
            before = self.L
            self._resize_instances(instance_count(self.n))
            return self.L - before
        d = pool_size(self.round)
        for _ in range(GROWTH_INSTANCES):
            inst = self._new_instance()
            inst.pool = self.supply.fresh(d)
            inst.blocked_count = 0
            inst.assignment = self.rng.integers(0, d, size=self._capacity, dtype=np.int64)
            self.instances.append(inst)
        self.bridges_used += GROWTH_INSTANCES * d
        return GROWTH_INSTANCES

    def leave_user(self, user) -> None:
        slot = self.slot_of(user)
        del self._slots.index[user]
        self._slots.alive[slot] = False

    # -- persistence -----------------------------------------------------------

    def snapshot(self, metrics: list | None = None) -> dict:
        slots = self.alive_slots()
        users = [self._slots.users[s] for s in slots]
        return {
            "round": self.round,
            "fallback": self.fallback,
            "bridges_used": self.bridges_used,
            "growth_base": self.growth_base,
            "users": users,
            "instances": [
                {
                    "pool": inst.pool.tolist(),
                    "blocked_count": inst.blocked_count,
                    "assignment": inst.assignment[slots].tolist(),
                }
                for inst in self.instances
            ],
            "unique": self._unique[slots].tolist() if self.fallback else [],
            "metrics": list(metrics or []),
        }

    def to_json(self, metrics: list | None = None) -> str:
        return json.dumps(self.snapshot(metrics))

    @classmethod
    def restore(cls, data: dict | str, supply: BridgeSupply, rng: np.random.Generator) -> Session:
        if isinstance(data, str):
            data = json.loads(data)
        users = [_tuple_if_list(u) for u in data["users"]]
        self = cls.__new__(cls)
        self.supply = supply
        self.rng = rng
        self.round = data["round"]
        self.fallback = data["fallback"]
        self.bridges_used = data["bridges_used"]
        self._slots = _Slots()
        self._capacity = 0
        self._unique = np.zeros(0, dtype=np.int64)
        self.instances = []
        self._ensure_capacity(len(users))
        for u in users:
            self._add_slot(u)
        n = len(users)
        for rec in data["instances"]:
            inst = self._new_instance()
            inst.pool = np.asarray(rec["pool"], dtype=np.int64)
            inst.blocked_count = rec["blocked_count"]
            inst.assignment[:n] = rec["assignment"]
            self.instances.append(inst)
        if self.fallback:
            self._unique[:n] = data["unique"]
        self.growth_base = data["growth_base"]
        return self


def _tuple_if_list(u):
    return tuple(u) if isinstance(u, list) else u


def _ordered(user_ids: Iterable[Hashable]) -> list:
    if isinstance(user_ids, (set, frozenset)):
        try:
            return sorted(user_ids)
        except TypeError:
            return sorted(user_ids, key=repr)
    out = list(dict.fromkeys(user_ids))
    return out
