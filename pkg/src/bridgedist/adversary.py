"""Censor models: corrupt users who learn bridges and decide when to block them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .distribution import Session, blocks_needed


class BudgetExceeded(ValueError):
    pass


@dataclass(frozen=True)
class Prudent:
    """Blocks just enough in one instance to force the next round."""

    name = "prudent"


@dataclass(frozen=True)
class Aggressive:
    """Blocks every bridge as soon as a corrupt user learns it."""

    name = "aggressive"


@dataclass(frozen=True)
class Stochastic:
    """Blocks each learned bridge independently with probability ``q``."""

    q: float = 0.95
    name = "stochastic"

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"blocking probability {self.q} outside [0, 1]")


Strategy = Prudent | Aggressive | Stochastic

DISTRIBUTOR_BEHAVIORS = ("silent", "garbage", "equivocate", "withhold", "biased")


def parse_strategy(text: str) -> Strategy:
    """``prudent``, ``aggressive``, ``stochastic`` or ``stochastic:<q>``."""
    name, _, arg = text.strip().lower().partition(":")
    if name == "prudent":
        return Prudent()
    if name == "aggressive":
        return Aggressive()
    if name == "stochastic":
        return Stochastic(float(arg)) if arg else Stochastic()
    raise ValueError(f"unknown strategy {text!r}")


def strategy_label(s: Strategy) -> str:
    return f"stochastic:{s.q:g}" if isinstance(s, Stochastic) else s.name


@dataclass
class Adversary:
    """Controls up to ``budget`` users and fewer than ``m / 3`` distributors.

    ``schedule`` maps a round number to how many users are corrupted at the
    start of that round; by default the whole budget is spent in round 1.
    Which users fall is decided by one random permutation drawn up front, so
    runs that differ only in ``budget`` corrupt nested sets of users.
    """

    budget: int
    strategy: Strategy = field(default_factory=Prudent)
    schedule: Mapping[int, int] | None = None
    corrupt_distributors: frozenset = frozenset()
    distributor_behavior: str = "garbage"
    corrupted: set = field(default_factory=set)
    known: set = field(default_factory=set)
    blocked_by_me: set = field(default_factory=set)

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("negative corruption budget")
        if self.schedule is None:
            self.schedule = {1: self.budget}
        if sum(self.schedule.values()) > self.budget:
            raise BudgetExceeded("schedule corrupts more users than the budget allows")
        if self.distributor_behavior not in DISTRIBUTOR_BEHAVIORS:
            raise ValueError(f"unknown distributor behaviour {self.distributor_behavior!r}")
        self.corrupt_distributors = frozenset(self.corrupt_distributors)
        self._order: list | None = None
        self._coins: np.ndarray = np.zeros(0)
        self._coin_rng: np.random.Generator | None = None
        self._flipped: set = set()

    def check_distributors(self, m: int):
        bound = (m - 1) // 3
        if len(self.corrupt_distributors) > bound:
            raise BudgetExceeded(f"at most {bound} of {m} distributors may be corrupt")

    def pending(self, round_no: int) -> bool:
        """True while scheduled corruptions are still to come after ``round_no``."""
        return any(r > round_no and k for r, k in self.schedule.items())

    # -- corruption ------------------------------------------------------------

    def corrupt_step(self, session: Session, rng: np.random.Generator, round_no: int) -> set:
        """Corrupt the users scheduled for ``round_no`` and learn their bridges."""
        k = self.schedule.get(round_no, 0)
        if len(self.corrupted) + k > self.budget:
            raise BudgetExceeded(f"corrupting {k} more would exceed budget {self.budget}")
        if self._order is None:
            users = session.users
            self._order = [users[i] for i in rng.permutation(len(users))]
        new = set()
        for u in self._order:
            if len(new) == k:
                break
            if u not in self.corrupted and u in session._slots.index:
                new.add(u)
        self.corrupted |= new
        self.observe(session)
        return new

    def corrupt(self, users, session: Session) -> set:
        """Corrupt specific users (scripted scenarios)."""
        users = set(users) - self.corrupted
        if len(self.corrupted) + len(users) > self.budget:
            raise BudgetExceeded(f"corrupting {len(users)} more would exceed budget {self.budget}")
        self.corrupted |= users
        self.observe(session)
        return users

    def corrupt_slots(self, session: Session) -> np.ndarray:
        idx = session._slots.index
        return np.array(sorted(idx[u] for u in self.corrupted if u in idx), dtype=np.int64)

    def observe(self, session: Session):
        """Add everything corrupted users currently hold to ``known``."""
        slots = self.corrupt_slots(session)
        if len(slots):
            self.known.update(np.unique(session.bridges_of_slots(slots)).tolist())

    # -- blocking ------------------------------------------------------------------

    def decide_blocks(self, session: Session, rng: np.random.Generator) -> set:
        self.observe(session)
        s = self.strategy
        if isinstance(s, Aggressive):
            out = self._known_unblocked(session)
        elif isinstance(s, Stochastic):
            out = self._stochastic(session, s.q, rng)
        else:
            out = self._prudent(session, rng)
        self.blocked_by_me |= out
        return out

    def _known_unblocked(self, session: Session) -> set:
        if not self.known:
            return set()
        ids = np.fromiter(self.known, dtype=np.int64)
        return set(ids[~session.supply.blocked_mask(ids)].tolist())

    def _stochastic(self, session: Session, q: float, rng: np.random.Generator) -> set:
        # one coin per bridge, drawn from a stream indexed by bridge id
        fresh = sorted(b for b in self._known_unblocked(session) if b not in self._flipped)
        if not fresh:
            return set()
        if self._coin_rng is None:
            self._coin_rng = np.random.default_rng(rng.integers(1 << 63))
        while fresh[-1] >= len(self._coins):
            # fixed-size blocks keep coin b the same whatever else is known
            self._coins = np.concatenate([self._coins, self._coin_rng.random(4096)])
        self._flipped.update(fresh)
        return {b for b in fresh if self._coins[b] < q}

    def _prudent(self, session: Session, rng: np.random.Generator) -> set:
        # Only bridges corrupt users hold this round count: that is what lets
        # each corrupt user block at most one bridge per instance per round.
        if session.fallback or session.round == 0:
            return set()
        slots = self.corrupt_slots(session)
        if not len(slots):
            return set()
        target = blocks_needed(session.round)
        best: list[int] = []
        best_need = 0
        for inst in session.instances:
            need = target - inst.blocked_count
            if need <= 0:
                return set()
            held = np.unique(inst.pool[inst.assignment[slots]])
            cand = held[~session.supply.blocked_mask(held)]
            if len(cand) >= need and (not best or len(cand) > len(best)):
                best, best_need = cand.tolist(), need
        if not best:
            return set()
        pick = rng.choice(len(best), size=best_need, replace=False)
        return {best[i] for i in sorted(pick)}
