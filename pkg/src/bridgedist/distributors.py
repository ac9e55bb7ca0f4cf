"""Bridge distribution run jointly by ``m`` distributors.

Bridges secret-share their addresses among all distributors when they
register, so distributors only ever handle pseudonyms (``secret_id``) and
shares.  Two ways of computing the user-bridge assignment are provided:

* :class:`LeaderBasedDistribution`: one honest-but-curious leader runs the
  distribution session over pseudonyms and broadcasts the assignment table.
* :class:`DecentralizedDistribution`: every honest distributor runs its own
  replica of the session; replicas stay identical because the randomness they
  draw comes from a commit-reveal distributed random generator whose output
  is fixed by Byzantine agreement.

Users collect one message from every distributor and reconstruct each
address with error correction, so fewer than ``m / 3`` bad distributors cannot
stop them.
"""

from __future__ import annotations

import hashlib
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .distribution import BridgeSupply, RoundPlan, Session
from .field import P61
from .messages import (
    AgreeMsg,
    AssignBroadcast,
    DrgCommit,
    DrgReveal,
    Network,
    RegisterShare,
    ShareDelivery,
)
from .sharing import ReconstructFailure, Share, SharingPolicy, reconstruct, share

MAX_RESTARTS = 10
BA_BEHAVIORS = ("silent", "random", "conflicting")


class Restart(Exception):
    """A DRG attempt was aborted; ``offenders`` is the log every honest node agreed on."""

    def __init__(self, offenders: tuple):
        super().__init__(f"DRG aborted, offenders: {offenders}")
        self.offenders = offenders


class Stalled(Exception):
    pass


class AgreementFailure(Exception):
    pass


class ReplicaDivergence(AssertionError):
    pass


def fault_bound(m: int) -> int:
    """Largest f with 3f < m: what agreement among m nodes can survive."""
    return (m - 1) // 3


def _party(index: int) -> tuple:
    return ("D", index)


def user_party(user) -> tuple:
    return ("U", user)


# -- distributors and registration ------------------------------------------------


@dataclass
class DistributorNode:
    """One distributor.  Corrupt nodes carry a ``behavior``:

    ``silent``      sends nothing at all
    ``garbage``     sends wrong shares and random agreement messages
    ``equivocate``  opens different DRG values to different peers
    ``withhold``    commits in the DRG but never opens
    ``biased``      follows the protocol but always contributes ``drg_value``
    """

    index: int
    honest: bool = True
    behavior: str | None = None
    role: str = "peer"
    shares: dict = field(default_factory=dict)
    session: Session | None = None
    session_view: dict = field(default_factory=dict)
    rng: random.Random = field(default_factory=random.Random)
    drg_log: list = field(default_factory=list)
    drg_value: int = 0

    def __post_init__(self):
        if not self.honest and self.behavior is None:
            self.behavior = "garbage"

    def outgoing_share(self, secret_id: int, p: int = P61) -> int | None:
        value = self.shares.get(secret_id)
        if value is None or self.behavior == "silent":
            return None
        if self.behavior == "garbage":
            # wrong, but the same wrong value every time this bridge is asked for
            h = hashlib.sha256(f"{self.index}:{secret_id}".encode()).digest()
            return (value + 1 + int.from_bytes(h[:8], "big") % (p - 1)) % p
        return value

    @property
    def ba_behavior(self) -> str | None:
        if self.honest:
            return None
        return {"silent": "silent", "garbage": "random", "equivocate": "conflicting"}.get(
            self.behavior
        )

    def snapshot(self) -> dict:
        return {
            "index": self.index,
            "role": self.role,
            "honest": self.honest,
            "shares": dict(self.shares),
            "session": self.session.snapshot() if self.session is not None else None,
            "session_view": {repr(u): list(v) for u, v in self.session_view.items()},
            "drg_log": [r.snapshot() for r in self.drg_log],
        }


def make_distributors(
    m: int, corrupt: Mapping[int, str] | None = None, seed: int = 0
) -> list[DistributorNode]:
    """Distributors ``1..m``; ``corrupt`` maps an index to its behaviour."""
    corrupt = dict(corrupt or {})
    if len(corrupt) > fault_bound(m):
        raise ValueError(f"at most {fault_bound(m)} of {m} distributors may be corrupt")
    nodes = []
    for j in range(1, m + 1):
        nodes.append(
            DistributorNode(
                index=j,
                honest=j not in corrupt,
                behavior=corrupt.get(j),
                rng=random.Random(f"{seed}:distributor:{j}"),
            )
        )
    return nodes


class BridgeRegistry:
    """Registration pipeline: hands out pseudonyms and deals address shares.

    The plaintext address of each bridge stays here, on the bridge side; the
    simulator uses it only to check what users reconstruct.
    """

    def __init__(self, nodes: Sequence[DistributorNode], policy: SharingPolicy,
                 rng: random.Random, network: Network | None = None):
        self.nodes = list(nodes)
        self.policy = policy
        self.rng = rng
        self.network = network
        self.next_id = 0
        self._address: dict[int, int] = {}
        self._by_address: dict[int, int] = {}

    def register(self, address: int) -> int:
        """Share ``address`` among all distributors; returns its secret_id."""
        sid = self.next_id
        self.next_id += 1
        for s, node in zip(share(address, self.policy, self.rng, sid), self.nodes):
            rec = RegisterShare(sid, s.index, s.value)
            if self.network is not None:
                (rec,) = self.network.send(("B", sid), _party(node.index), [rec])
            node.shares[rec.secret_id] = rec.value
        self._address[sid] = address
        self._by_address[address] = sid
        return sid

    def random_address(self) -> int:
        while True:
            ip = self.rng.randrange(1 << 24, 224 << 24)
            addr = ip << 16 | self.rng.randrange(1024, 1 << 16)
            if addr not in self._by_address:
                return addr

    def ensure(self, count: int):
        """Register random bridges until ``count`` secret_ids exist."""
        while self.next_id < count:
            self.register(self.random_address())

    def supply(self, limit: int | None = None) -> BridgeSupply:
        """A fresh supply view whose ids are this registry's secret_ids."""
        return BridgeSupply(limit=limit, on_issue=lambda ids: self.ensure(int(ids[-1]) + 1))

    def address_of(self, secret_id: int) -> int:
        return self._address[secret_id]

    def secret_id_of(self, address: int) -> int | None:
        return self._by_address.get(address)

    @property
    def addresses(self) -> set[int]:
        return set(self._address.values())


def register_bridge(address: int, registry: BridgeRegistry) -> int:
    return registry.register(address)


# -- user side ---------------------------------------------------------------------


def user_reconstruct(messages: Iterable[ShareDelivery], policy: SharingPolicy,
                     strict: bool = True) -> dict[int, int | None]:
    """Addresses of every bridge a user received shares for, keyed by secret_id.

    With ``strict`` a bridge that cannot be decoded raises
    :class:`ReconstructFailure`; otherwise it maps to None.
    """
    by_sid: dict[int, dict[int, int]] = defaultdict(dict)
    for msg in messages:
        if msg.value is not None:
            by_sid[msg.secret_id][msg.index] = msg.value
    out = {}
    for sid, got in by_sid.items():
        try:
            out[sid] = reconstruct([Share(j, v, sid) for j, v in got.items()], policy)
        except ReconstructFailure as exc:
            if strict:
                raise ReconstructFailure(f"bridge {sid}: {exc}") from exc
            out[sid] = None
    return out


def deliver_shares(nodes: Sequence[DistributorNode], table: Mapping[Any, Sequence[int]],
                   network: Network | None, p: int = P61) -> dict[Any, list[ShareDelivery]]:
    """Every distributor sends each user one message with its shares of the
    bridges assigned to that user."""
    inbox: dict[Any, list[ShareDelivery]] = defaultdict(list)
    for node in nodes:
        if node.behavior == "silent":
            continue
        for user, sids in table.items():
            recs = [ShareDelivery(user, sid, node.index, node.outgoing_share(sid, p)) for sid in sids]
            if network is not None:
                recs = network.send(_party(node.index), user_party(user), recs)
            inbox[user].extend(recs)
    return inbox


def assignment_table(session: Session) -> dict[Any, tuple[int, ...]]:
    slots = session.alive_slots()
    held = session.bridges_of_slots(slots)
    users = session._slots.users
    return {users[s]: tuple(held[:, k].tolist()) for k, s in enumerate(slots)}


# -- leader-based ---------------------------------------------------------------------


def leader_assign_round(leader: DistributorNode, nodes: Sequence[DistributorNode],
                        network: Network | None = None,
                        changed_only: bool = False) -> dict[Any, tuple[int, ...]]:
    """Leader broadcasts ``(user, secret_ids)`` to all distributors.

    With ``changed_only`` just the entries that differ from the previous
    broadcast are sent and returned.
    """
    table = assignment_table(leader.session)
    changed = table
    if changed_only:
        changed = {u: ids for u, ids in table.items() if leader.session_view.get(u) != ids}
    leader.session_view = table
    records = [AssignBroadcast(u, ids) for u, ids in changed.items()]
    for node in nodes:
        if node is leader:
            continue
        got = records
        if network is not None and records:
            got = network.send(_party(leader.index), _party(node.index), records)
        node.session_view = {**node.session_view, **{r.user: tuple(r.indices) for r in got}}
    return changed


class LeaderBasedDistribution:
    def __init__(self, nodes: Sequence[DistributorNode], registry: BridgeRegistry, users,
                 rng: np.random.Generator, network: Network | None = None, leader: int = 1):
        self.nodes = list(nodes)
        self.registry = registry
        self.network = network
        self.leader = next(n for n in self.nodes if n.index == leader)
        if not self.leader.honest:
            raise ValueError("the leader-based protocol needs an honest leader")
        self.leader.role = "leader"
        self.leader.session = Session(users, registry.supply(), rng)
        self.inbox: dict = {}

    @property
    def session(self) -> Session:
        return self.leader.session

    def step(self) -> RoundPlan | None:
        plan = self.session.advance_round_if_triggered()
        if plan is None:
            return None
        table = leader_assign_round(self.leader, self.nodes, self.network)
        self.inbox = deliver_shares(self.nodes, table, self.network, self.registry.policy.p)
        return plan

    def report_blocked(self, ids) -> int:
        replaced = self.session.report_blocked(ids)
        if replaced:
            # fallback replacements reach only the users whose bridge changed
            table = leader_assign_round(self.leader, self.nodes, self.network, changed_only=True)
            self.inbox.update(deliver_shares(self.nodes, table, self.network, self.registry.policy.p))
        return replaced


# -- Byzantine agreement ------------------------------------------------------------

_BOT = object()  # "no value reached the threshold"
_MISSING = object()  # no message arrived


def _corrupt_message(behavior: str, rng: random.Random, recipient: int,
                     choices: Sequence[list], p: int):
    if behavior == "silent":
        return _MISSING
    if behavior == "random":
        return tuple(rng.randrange(p) for _ in choices)
    # conflicting: tell different recipients different plausible values
    return tuple(ch[recipient % len(ch)] for ch in choices)


def _phase_king(inputs: Mapping[int, tuple], corrupt: Mapping[int, str], f: int,
                rng: random.Random, network: Network | None, tag: str, p: int) -> dict[int, tuple]:
    """Vector phase-king agreement for ``m > 3f``; one instance per slot,
    batched so each round costs one message per ordered pair of nodes."""
    ids = sorted(set(inputs) | set(corrupt))
    m = len(ids)
    width = len(next(iter(inputs.values())))
    v = {i: list(vec) for i, vec in inputs.items()}

    def choices(state):
        out = []
        for s in range(width):
            seen = list(dict.fromkeys(state[i][s] for i in sorted(state) if state[i][s] is not _BOT))
            seen.append(("decoy", s))
            out.append(seen)
        return out

    def exchange(state, phase, senders) -> dict[int, list]:
        """recv[i] = list of vectors honest node i got in this round."""
        ch = choices(state)
        recv: dict[int, list] = {i: [] for i in inputs}
        for j in senders:
            for i in inputs:
                if j in inputs:
                    msg = tuple(state[j])
                else:
                    msg = _corrupt_message(corrupt[j], rng, i, ch, p)
                if msg is _MISSING:
                    continue
                if i != j and network is not None:
                    network.send(_party(j), _party(i), [AgreeMsg(f"{tag}:{phase}", ())])
                recv[i].append(msg)
            if network is not None and j in inputs:
                for c in corrupt:
                    if c != j:
                        network.send(_party(j), _party(c), [AgreeMsg(f"{tag}:{phase}", ())])
        return recv

    for phase in range(f + 1):
        king = ids[phase]
        recv = exchange(v, f"{phase}.1", ids)
        prop = {}
        for i, msgs in recv.items():
            row = []
            for s in range(width):
                counts = Counter(_slot(msg, s) for msg in msgs)
                x, c = _top(counts)
                row.append(x if c >= m - f else _BOT)
            prop[i] = row
        recv = exchange(prop, f"{phase}.2", ids)
        graded = {}
        for i, msgs in recv.items():
            g = []
            for s in range(width):
                counts = Counter(_slot(msg, s) for msg in msgs)
                counts.pop(_BOT, None)
                x, c = _top(counts)
                if c >= m - f:
                    v[i][s] = x
                    g.append(True)
                else:
                    if c >= f + 1:
                        v[i][s] = x
                    g.append(False)
            graded[i] = g
        recv = exchange(v, f"{phase}.3", [king])
        for i, msgs in recv.items():
            if not msgs:
                continue
            kv = msgs[0]
            for s in range(width):
                if not graded[i][s]:
                    val = _slot(kv, s)
                    if val is not _BOT and val is not _MISSING:
                        v[i][s] = val
    return {i: tuple(vec) for i, vec in v.items()}


def _slot(msg, s):
    try:
        return msg[s]
    except (TypeError, IndexError):
        return _MISSING


def _top(counts: Counter):
    counts.pop(_MISSING, None)
    if not counts:
        return _BOT, 0
    best = max(counts.values())
    # ties only happen below every threshold that matters; pick deterministically
    for x, c in counts.items():
        if c == best:
            return x, c


def byzantine_agree(proposals: Mapping[int, Any], f: int, corrupt: Mapping[int, str] | None = None,
                    rng: random.Random | None = None, network: Network | None = None,
                    p: int = P61) -> dict[int, Any]:
    """Agree on one value among honest nodes ``proposals`` despite ``corrupt``.

    ``corrupt`` maps node indices to a behaviour in :data:`BA_BEHAVIORS`.
    Runs ``f + 1`` phases of three synchronous rounds.  Returns every honest
    node's decision; raises :class:`AgreementFailure` if they differ, which
    cannot happen while at most ``f < m / 3`` nodes are corrupt.
    """
    corrupt = dict(corrupt or {})
    m = len(proposals) + len(corrupt)
    if set(proposals) & set(corrupt):
        raise ValueError("a node cannot be both honest and corrupt")
    if f < 0 or f > fault_bound(m):
        raise ValueError(f"fault bound f={f} not below m/3 for m={m}")
    if len(corrupt) > f:
        raise ValueError(f"{len(corrupt)} corrupt nodes exceed fault bound {f}")
    bad = set(corrupt.values()) - set(BA_BEHAVIORS)
    if bad:
        raise ValueError(f"unknown behaviours {bad}")
    out = _phase_king({i: (v,) for i, v in proposals.items()}, corrupt, f,
                      rng or random.Random(0), network, "ba", p)
    decided = {i: vec[0] for i, vec in out.items()}
    if len(set(map(_key, decided.values()))) > 1:
        raise AgreementFailure("honest nodes decided differently")
    return decided


def _key(v):
    return repr(v)


# -- distributed random generation -------------------------------------------------


def commit_digest(value: int, nonce: bytes) -> bytes:
    return hashlib.sha256(int(value).to_bytes(8, "big") + nonce).digest()


@dataclass(frozen=True)
class Commitment:
    digest: bytes
    opened: tuple[int, bytes] | None = None

    @classmethod
    def commit(cls, value: int, nonce: bytes) -> Commitment:
        return cls(commit_digest(value, nonce))

    def verify(self, value: int, nonce: bytes) -> bool:
        return commit_digest(value, nonce) == self.digest

    def open(self, value: int, nonce: bytes) -> Commitment:
        if not self.verify(value, nonce):
            raise ValueError("opening does not match the commitment")
        return Commitment(self.digest, (value, nonce))


@dataclass
class DrgRound:
    phase: str = "Commit"
    commitments: dict = field(default_factory=dict)
    reveals: dict = field(default_factory=dict)
    result: int | None = None
    offenders: tuple = ()

    def snapshot(self) -> dict:
        return {
            "phase": self.phase,
            "commitments": {j: c.digest.hex() for j, c in self.commitments.items()},
            "reveals": dict(self.reveals),
            "result": self.result,
            "offenders": [list(o) for o in self.offenders],
        }


def _contribution(node: DistributorNode, p: int, recipient: int) -> tuple | None:
    """What ``node`` commits to and opens towards ``recipient`` (None if nothing)."""
    if node.behavior == "silent":
        return None
    value, nonce = node._drg_secret
    if node.behavior == "equivocate" and recipient % 2 == 0:
        value, nonce = node._drg_alt
    digest = commit_digest(value, nonce)
    if node.behavior == "withhold":
        return (digest, None, None)
    return (digest, value, nonce)


def drg_run(nodes: Sequence[DistributorNode], p: int = P61, network: Network | None = None,
            rng: random.Random | None = None, excluded: Iterable[int] = ()) -> int:
    """One commit-reveal-agree round; every honest node outputs the same sum.

    Raises :class:`Restart` (with the agreed offender log) if some node
    committed without opening, or if any node claims it was shown a different
    opening than the one agreed on.  Contributions and complaints of nodes in
    ``excluded`` are ignored, though those nodes still take part.
    """
    excluded = frozenset(excluded)
    rng = rng or random.Random(0)
    f = fault_bound(len(nodes))
    honest = [n for n in nodes if n.honest]
    by_index = {n.index: n for n in nodes}
    ids = sorted(by_index)

    for node in nodes:
        if node.behavior == "biased":
            node._drg_secret = (node.drg_value % p, node.rng.randbytes(16))
        else:
            node._drg_secret = (node.rng.randrange(p), node.rng.randbytes(16))
        node._drg_alt = ((node._drg_secret[0] + 1) % p, node.rng.randbytes(16))

    # commit, then reveal: received[i][j] is what j showed to i
    received: dict[int, dict[int, tuple | None]] = {n.index: {} for n in honest}
    logs = {n.index: DrgRound() for n in honest}
    for kind in ("commit", "reveal"):
        for j in ids:
            sender = by_index[j]
            for node in honest:
                c = _contribution(sender, p, node.index)
                if c is None or (kind == "reveal" and c[1] is None):
                    continue
                rec = DrgCommit(j, c[0]) if kind == "commit" else DrgReveal(j, c[1], c[2])
                if network is not None and j != node.index:
                    (rec,) = network.send(_party(j), _party(node.index), [rec])
                if kind == "commit":
                    logs[node.index].commitments[j] = Commitment(rec.digest)
                    received[node.index][j] = (rec.digest, None, None)
                else:
                    digest = received[node.index].get(j, (None,))[0]
                    received[node.index][j] = (digest, rec.value, rec.nonce)
                    logs[node.index].reveals[j] = rec.value
        if network is not None:
            # corrupt nodes also talk to each other; count their traffic too
            _count_corrupt_traffic(nodes, network, kind)

    for lg in logs.values():
        lg.phase = "Agree"
    # corrupt nodes without a scripted agreement behaviour follow it faithfully
    corrupt = {n.index: n.ba_behavior or "honest" for n in nodes if not n.honest}
    agreed = _agree_vectors({i: tuple(received[i].get(j) for j in ids) for i in received},
                            corrupt, f, rng, network, "drg.view", p, nodes)
    complaints = {
        i: tuple(received[i].get(j) != agreed[i][k] for k, j in enumerate(ids)) for i in received
    }
    # everyone announces its complaint vector, then agrees on what each announced
    heard = {i: tuple(complaints[j] if j in complaints else _corrupt_complaint(by_index[j], len(ids))
                      for j in ids) for i in received}
    if network is not None:
        for j in ids:
            if by_index[j].behavior == "silent":
                continue
            for i in ids:
                if i != j:
                    network.send(_party(j), _party(i), [AgreeMsg("drg.complain", ())])
    claims = _agree_vectors(heard, corrupt, f, rng, network, "drg.complaints", p, nodes)

    decisions = {}
    for i in received:
        offenders = []
        total = 0
        for k, j in enumerate(ids):
            slot = agreed[i][k]
            if slot is None or j in excluded:
                continue  # never committed: left out of the sum
            if not _well_formed(slot) or slot[1] is None or commit_digest(slot[1], slot[2]) != slot[0]:
                offenders.append(("withheld", j))
                continue
            total += slot[1]
        for k, j in enumerate(ids):
            vec = claims[i][k]
            if j in excluded:
                continue
            if isinstance(vec, tuple) and len(vec) == len(ids) and all(isinstance(b, bool) for b in vec):
                offenders.extend(("equivocation", ids[a], j) for a, b in enumerate(vec)
                                 if b and ids[a] not in excluded)
        lg = logs[i]
        lg.offenders = tuple(offenders)
        if offenders:
            lg.phase = "Aborted"
        else:
            lg.phase, lg.result = "Done", total % p
        by_index[i].drg_log.append(lg)
        decisions[i] = (lg.phase, lg.result, lg.offenders)

    if len(set(decisions.values())) != 1:
        raise AgreementFailure("honest nodes reached different DRG decisions")
    phase, result, offenders = next(iter(decisions.values()))
    if phase == "Aborted":
        raise Restart(offenders)
    return result


def _well_formed(slot) -> bool:
    return isinstance(slot, tuple) and len(slot) == 3 and isinstance(slot[0], bytes)


def _corrupt_complaint(node: DistributorNode, width: int):
    if node.behavior == "silent":
        return None
    if node.behavior == "garbage":
        return tuple(True for _ in range(width))
    return tuple(False for _ in range(width))


def _count_corrupt_traffic(nodes, network, kind):
    bad = [n for n in nodes if not n.honest and n.behavior != "silent"]
    for a in bad:
        for b in nodes:
            if b is not a and not b.honest:
                network.send(_party(a.index), _party(b.index), [AgreeMsg(kind, ())])


def _agree_vectors(inputs, corrupt, f, rng, network, tag, p, nodes) -> dict[int, tuple]:
    """Interactive consistency: agree slot by slot on what each honest node holds."""
    script = {j: b for j, b in corrupt.items() if b != "honest"}
    followers = [j for j, b in corrupt.items() if b == "honest"]
    if followers:
        # a corrupt node running the protocol faithfully acts like an honest one
        # whose input is what the honest majority holds
        ref = next(iter(inputs.values()))
        inputs = dict(inputs)
        for j in followers:
            inputs[j] = ref
    out = _phase_king(inputs, script, f, rng, network, tag, p)
    for j in followers:
        out.pop(j, None)
    return out


def index_from_random(r: int, d: int, p: int = P61, exact: bool | None = None) -> int | None:
    """1-based index in ``[1, d]`` from a uniform field element.

    With ``exact`` (default for fields below 2**32) values in the final
    partial block are rejected and None is returned, so the caller draws
    again; otherwise plain reduction is used and the bias is at most d/p.
    """
    if d < 1:
        raise ValueError("empty pool")
    if exact is None:
        exact = p < (1 << 32)
    if exact and r >= p - p % d:
        return None
    return r % d + 1


def exclusions(offenders: Iterable[tuple], f: int) -> set[int]:
    """Nodes to leave out of later attempts, given an agreed offender log.

    A node that committed and did not open is out.  For an equivocation
    complaint nobody can tell whether the accused or the accuser lied, so both
    go; every such pair holds at least one corrupt node.  An accuser naming
    more than ``f`` nodes must itself be corrupt and goes alone.
    """
    offenders = list(offenders)
    out = {o[1] for o in offenders if o[0] == "withheld"}
    accused = defaultdict(set)
    for o in offenders:
        if o[0] == "equivocation":
            accused[o[2]].add(o[1])
    for accuser, names in accused.items():
        out.add(accuser)
        if len(names) <= f:
            out |= names
    return out


def agreed_random(nodes: Sequence[DistributorNode], p: int = P61, network: Network | None = None,
                  rng: random.Random | None = None, max_restarts: int = MAX_RESTARTS,
                  excluded: set | None = None) -> int:
    """Run the DRG until it completes; :class:`Stalled` after too many restarts.

    ``excluded`` is updated in place so callers can carry it across rounds.
    """
    excluded = set() if excluded is None else excluded
    f = fault_bound(len(nodes))
    for _ in range(max_restarts + 1):
        try:
            return drg_run(nodes, p, network, rng, excluded)
        except Restart as exc:
            excluded |= exclusions(exc.offenders, f)
    raise Stalled(f"DRG restarted more than {max_restarts} times")


def decentralized_assign(nodes: Sequence[DistributorNode], user, instance: int,
                         p: int = P61, network: Network | None = None,
                         rng: random.Random | None = None,
                         max_restarts: int = MAX_RESTARTS,
                         excluded: set | None = None) -> dict[int, ShareDelivery]:
    """Jointly pick ``user``'s bridge in ``instance`` and send it the shares.

    Every honest node maps the agreed random value to the same pool entry of
    its own replica.  Returns the message each non-silent distributor sends.
    """
    honest = [n for n in nodes if n.honest]
    d = honest[0].session.instances[instance].d
    excluded = set() if excluded is None else excluded
    f = fault_bound(len(nodes))
    for _ in range(max_restarts + 1):
        try:
            r = drg_run(nodes, p, network, rng, excluded)
        except Restart as exc:
            excluded |= exclusions(exc.offenders, f)
            continue
        k = index_from_random(r, d, p)
        if k is None:
            continue
        break
    else:
        raise Stalled(f"no agreed index for user {user!r} after {max_restarts} restarts")
    chosen = set()
    for node in honest:
        node.session.assign(user, instance, k - 1)
        chosen.add(int(node.session.instances[instance].pool[k - 1]))
    if len(chosen) != 1:
        raise ReplicaDivergence(f"replicas picked different bridges: {chosen}")
    sid = chosen.pop()
    out = {}
    for node in nodes:
        if node.behavior == "silent":
            continue
        out[node.index] = ShareDelivery(user, sid, node.index, node.outgoing_share(sid, p))
    return out


class DecentralizedDistribution:
    """Each honest distributor runs its own session replica.

    By default one DRG output per round seeds every replica's generator, from
    which all per-user choices are expanded.  ``per_user=True`` instead runs a
    separate DRG for every user and instance (slow; for small checks).
    """

    def __init__(self, nodes: Sequence[DistributorNode], registry: BridgeRegistry, users,
                 network: Network | None = None, rng: random.Random | None = None,
                 per_user: bool = False, max_restarts: int = MAX_RESTARTS):
        self.nodes = list(nodes)
        self.registry = registry
        self.network = network
        self.rng = rng or random.Random(0)
        self.per_user = per_user
        self.max_restarts = max_restarts
        self.honest = [n for n in self.nodes if n.honest]
        if len(self.nodes) < 4 or len(self.nodes) - len(self.honest) > fault_bound(len(self.nodes)):
            raise ValueError("need m >= 4 and fewer than m / 3 corrupt distributors")
        users = list(users)
        for node in self.honest:
            node.session = Session(users, registry.supply(), np.random.default_rng(0))
        self.inbox: dict = {}
        self.restarts = 0
        self.excluded: set = set()

    @property
    def session(self) -> Session:
        return self.honest[0].session

    def _random(self) -> int:
        f = fault_bound(len(self.nodes))
        for _ in range(self.max_restarts + 1):
            try:
                return drg_run(self.nodes, self.registry.policy.p, self.network, self.rng,
                               self.excluded)
            except Restart as exc:
                self.restarts += 1
                self.excluded |= exclusions(exc.offenders, f)
        raise Stalled(f"DRG restarted more than {self.max_restarts} times")

    def step(self) -> RoundPlan | None:
        if not self.session.triggered():
            return None
        seed = self._random()
        plans = set()
        for node in self.honest:
            node.session.rng = np.random.default_rng([seed, node.session.round + 1])
            plans.add(node.session.advance_round_if_triggered())
        if len(plans) != 1:
            raise ReplicaDivergence("replicas disagree on the round plan")
        plan = plans.pop()
        if self.per_user and not plan.fallback:
            for user in self.session.users:
                for inst in range(self.session.L):
                    decentralized_assign(self.nodes, user, inst, self.registry.policy.p,
                                         self.network, self.rng, self.max_restarts,
                                         self.excluded)
        self._publish()
        return plan

    def _publish(self, fresh: bool = True):
        tables = [assignment_table(n.session) for n in self.honest]
        if any(t != tables[0] for t in tables[1:]):
            raise ReplicaDivergence("replicas hold different assignments")
        old = self.nodes[0].session_view
        changed = tables[0] if fresh else {u: v for u, v in tables[0].items() if old.get(u) != v}
        for node in self.nodes:
            node.session_view = tables[0]
        got = deliver_shares(self.nodes, changed, self.network, self.registry.policy.p)
        if fresh:
            self.inbox = got
        else:
            self.inbox.update(got)

    def report_blocked(self, ids) -> int:
        ids = list(ids)
        replaced = {n.session.report_blocked(ids) for n in self.honest}
        if len(replaced) != 1:
            raise ReplicaDivergence("replicas replaced different numbers of bridges")
        r = replaced.pop()
        if r:
            self._publish(fresh=False)
        return r


# -- obliviousness -------------------------------------------------------------------


def leaked_addresses(state: Any, addresses: Iterable[int]) -> list[str]:
    """Paths inside a (JSON-like) state snapshot where a registered address shows up.

    An address counts as present if its packed integer value appears, or its
    dotted ``ip:port`` / ``ip`` text appears inside any string.
    """
    from .sharing import decode_address

    ints = set(addresses)
    texts = set()
    for a in ints:
        ip, port = decode_address(a)
        texts.add(f"{ip}:{port}")
        texts.add(ip)
    hits: list[str] = []

    def walk(obj, path):
        if isinstance(obj, bool) or obj is None:
            return
        if isinstance(obj, int):
            if obj in ints:
                hits.append(path)
        elif isinstance(obj, str):
            if obj.isdigit() and int(obj) in ints or any(t in obj for t in texts):
                hits.append(path)
        elif isinstance(obj, dict):
            for k, v in obj.items():
                walk(k, f"{path}/<key>")
                walk(v, f"{path}/{k}")
        elif isinstance(obj, (list, tuple, set)):
            for i, v in enumerate(obj):
                walk(v, f"{path}[{i}]")
        elif isinstance(obj, np.ndarray):
            walk(obj.tolist(), path)

    walk(state, "")
    return hits
