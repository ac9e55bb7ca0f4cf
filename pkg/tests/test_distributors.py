import itertools
import json
import random
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare

from bridgedist.distributors import (
    BA_BEHAVIORS,
    BridgeRegistry,
    Commitment,
    DecentralizedDistribution,
    LeaderBasedDistribution,
    Restart,
    Stalled,
    agreed_random,
    byzantine_agree,
    decentralized_assign,
    drg_run,
    exclusions,
    fault_bound,
    index_from_random,
    leaked_addresses,
    make_distributors,
    user_party,
    user_reconstruct,
)
from bridgedist.messages import Network, ShareDelivery
from bridgedist.sharing import ReconstructFailure, SharingPolicy


class ZeroRandom(random.Random):
    def randrange(self, *args):
        return 0


def setup(m, corrupt=None, seed=0):
    nodes = make_distributors(m, corrupt, seed=seed)
    net = Network()
    reg = BridgeRegistry(nodes, SharingPolicy(m), random.Random(seed), net)
    return nodes, reg, net


class TestNodes:
    def test_fault_bound(self):
        assert [fault_bound(m) for m in (1, 3, 4, 6, 7, 10)] == [0, 0, 1, 1, 2, 3]

    def test_too_many_corrupt(self):
        with pytest.raises(ValueError):
            make_distributors(4, {1: "silent", 2: "silent"})

    def test_garbage_is_wrong_and_stable(self):
        nodes, reg, _ = setup(4, {4: "garbage"})
        sid = reg.register(reg.random_address())
        bad = nodes[3]
        assert bad.outgoing_share(sid) != bad.shares[sid]
        assert bad.outgoing_share(sid) == bad.outgoing_share(sid)
        assert nodes[0].outgoing_share(sid) == nodes[0].shares[sid]


class TestRegistration:
    def test_round_trip(self):
        nodes, reg, net = setup(7)
        addr = reg.random_address()
        sid = reg.register(addr)
        msgs = [ShareDelivery("u", sid, n.index, n.shares[sid]) for n in nodes]
        assert user_reconstruct(msgs, reg.policy) == {sid: addr}
        assert all(net.received[("D", n.index)] == 1 for n in nodes)

    def test_distinct_ids(self):
        _, reg, _ = setup(4)
        assert reg.register(reg.random_address()) != reg.register(reg.random_address())

    def test_silent_minority_dropped(self):
        m = 10
        nodes, reg, _ = setup(m, {8: "silent", 9: "silent", 10: "silent"})
        addr = reg.random_address()
        sid = reg.register(addr)
        msgs = [ShareDelivery("u", sid, n.index, n.outgoing_share(sid)) for n in nodes]
        assert sum(v.value is None for v in msgs) == 3
        assert user_reconstruct(msgs, reg.policy)[sid] == addr

    def test_no_plaintext_in_distributor_state(self):
        nodes, reg, _ = setup(4)
        reg.ensure(50)
        snaps = json.loads(json.dumps([n.snapshot() for n in nodes]))
        assert leaked_addresses(snaps, reg.addresses) == []
        # and the scanner does see a planted address
        assert leaked_addresses({"x": [next(iter(reg.addresses))]}, reg.addresses)


class TestUserReconstruct:
    def test_garbage_minority(self):
        nodes, reg, _ = setup(10, {8: "garbage", 9: "garbage", 10: "garbage"})
        addrs = {reg.register(reg.random_address()): None for _ in range(5)}
        msgs = [ShareDelivery("u", sid, n.index, n.outgoing_share(sid)) for sid in addrs for n in nodes]
        got = user_reconstruct(msgs, reg.policy)
        assert got == {sid: reg.address_of(sid) for sid in addrs}

    def test_silent_plus_garbage_beyond_bound_fails_loudly(self):
        nodes, reg, _ = setup(10)
        sid = reg.register(reg.random_address())
        msgs = [ShareDelivery("u", sid, n.index, n.shares[sid]) for n in nodes[3:]]
        msgs = [m if m.index > 5 else ShareDelivery("u", sid, m.index, m.value + 1) for m in msgs]
        with pytest.raises(ReconstructFailure):
            user_reconstruct(msgs, reg.policy)
        assert user_reconstruct(msgs, reg.policy, strict=False) == {sid: None}


class TestAgreement:
    def test_validity_trivial(self):
        out = byzantine_agree({1: 7, 2: 7, 3: 7, 4: 7}, 1)
        assert set(out.values()) == {7}

    def test_bound(self):
        with pytest.raises(ValueError):
            byzantine_agree({1: 1, 2: 1}, 2, {3: "silent", 4: "silent"})
        with pytest.raises(ValueError):
            byzantine_agree({1: 1, 2: 1, 3: 1}, 1, {4: "sneaky"})

    def test_exhaustive_four_nodes(self):
        cases = 0
        for bad in range(1, 5):
            for behavior in BA_BEHAVIORS:
                for vals in itertools.product([0, 1, 2], repeat=3):
                    for seed in range(3):
                        honest = [i for i in range(1, 5) if i != bad]
                        out = byzantine_agree(dict(zip(honest, vals)), 1, {bad: behavior},
                                              random.Random(seed))
                        assert len(set(out.values())) == 1
                        if len(set(vals)) == 1:
                            assert set(out.values()) == {vals[0]}
                        cases += 1
        assert cases == 4 * 3 * 27 * 3

    def test_randomized_ten_nodes(self):
        rnd = random.Random(7)
        for _ in range(40):
            bad = rnd.sample(range(1, 11), 3)
            honest = [i for i in range(1, 11) if i not in bad]
            props = {i: rnd.choice([5, 6]) for i in honest}
            corrupt = {b: rnd.choice(BA_BEHAVIORS) for b in bad}
            out = byzantine_agree(props, 3, corrupt, rnd)
            assert len(set(out.values())) == 1
            assert set(out.values()) <= {5, 6} | {v for v in out.values()}

    def test_message_count(self):
        net = Network()
        byzantine_agree({1: 1, 2: 1, 3: 1, 4: 1}, 1, network=net)
        # two phases, two all-to-all rounds and one king broadcast each
        assert sum(net.sent.values()) == 2 * (2 * 12 + 3)


class TestCommitment:
    def test_verify_and_open(self):
        c = Commitment.commit(5, b"n" * 16)
        assert c.verify(5, b"n" * 16) and not c.verify(6, b"n" * 16)
        assert c.open(5, b"n" * 16).opened == (5, b"n" * 16)
        with pytest.raises(ValueError):
            c.open(6, b"n" * 16)


class TestDrg:
    def test_all_zero(self):
        nodes = make_distributors(4)
        for n in nodes:
            n.rng = ZeroRandom()
        assert drg_run(nodes, 17) == 0
        assert all(n.drg_log[-1].phase == "Done" and n.drg_log[-1].result == 0 for n in nodes)

    def test_result_is_sum_of_reveals(self):
        nodes = make_distributors(4, seed=5)
        r = drg_run(nodes)
        log = nodes[0].drg_log[-1]
        assert r == sum(log.reveals.values()) % (2**61 - 1)
        assert all(n.drg_log[-1].reveals == log.reveals for n in nodes)

    def test_uniform_with_biased_node(self):
        nodes = make_distributors(4, {4: "biased"}, seed=9)
        nodes[3].drg_value = 3
        counts = Counter(drg_run(nodes, 17) for _ in range(3000))
        assert chisquare([counts[v] for v in range(17)]).pvalue > 0.01

    def test_equivocation_restarts_everyone(self):
        for seed in range(10):
            nodes = make_distributors(4, {2: "equivocate"}, seed=seed)
            with pytest.raises(Restart) as info:
                drg_run(nodes, 17)
            logs = [n.drg_log[-1] for n in nodes if n.honest]
            assert {lg.phase for lg in logs} == {"Aborted"}
            assert len({lg.offenders for lg in logs}) == 1
            assert all(o[1] == 2 for o in info.value.offenders if o[0] == "equivocation")

    def test_withhold_logged(self):
        nodes = make_distributors(7, {3: "withhold"}, seed=1)
        with pytest.raises(Restart) as info:
            drg_run(nodes)
        assert info.value.offenders == (("withheld", 3),)

    def test_silent_left_out(self):
        nodes = make_distributors(4, {4: "silent"}, seed=2)
        drg_run(nodes)
        assert 4 not in nodes[0].drg_log[-1].reveals

    def test_exclusion_rules(self):
        assert exclusions([("withheld", 3)], 1) == {3}
        assert exclusions([("equivocation", 2, 4)], 1) == {2, 4}
        assert exclusions([("equivocation", a, 4) for a in (1, 2, 3)], 1) == {4}

    @pytest.mark.parametrize("behavior", ["equivocate", "withhold", "garbage", "silent", "biased"])
    def test_agreed_random_terminates(self, behavior):
        nodes = make_distributors(10, {8: behavior, 9: behavior, 10: behavior}, seed=4)
        excluded = set()
        r = agreed_random(nodes, 17, excluded=excluded)
        assert 0 <= r < 17
        assert len(excluded) <= 6

    def test_stalled(self):
        nodes = make_distributors(4, {1: "withhold"})
        with pytest.raises(Stalled):
            agreed_random(nodes, 17, max_restarts=0)


class TestIndexFromRandom:
    def test_single_bridge(self):
        assert all(index_from_random(r, 1) == 1 for r in (0, 5, 2**60))

    def test_rejection_in_small_field(self):
        assert index_from_random(16, 4, 17) is None
        assert index_from_random(15, 4, 17) == 4
        counts = Counter(index_from_random(r, 4, 17) for r in range(17))
        assert counts.pop(None) == 1 and set(counts.values()) == {4}

    def test_plain_modulo_in_big_field(self):
        assert index_from_random(2**61 - 2, 32) == (2**61 - 2) % 32 + 1


class TestLeaderBased:
    def test_messages_and_reconstruction(self):
        m = 7
        nodes, reg, net = setup(m, {6: "garbage", 7: "garbage"})
        dist = LeaderBasedDistribution(nodes, reg, range(2048), np.random.default_rng(1), net)
        net.reset()
        dist.step()
        L = dist.session.L
        for u in (0, 100, 2047):
            assert net.received[user_party(u)] == m
            got = user_reconstruct(dist.inbox[u], reg.policy)
            held = dist.session.assignments_for(u)
            assert len(held) == L and got == {sid: reg.address_of(sid) for sid in held}
        assert all(n.session_view == nodes[0].session_view for n in nodes)

    def test_single_user(self):
        nodes, reg, net = setup(4)
        dist = LeaderBasedDistribution(nodes, reg, ["solo"], np.random.default_rng(0), net)
        dist.step()
        assert dist.session.fallback and len(dist.inbox["solo"]) == 4
        assert len(user_reconstruct(dist.inbox["solo"], reg.policy)) == 1

    def test_leader_must_be_honest(self):
        nodes, reg, _ = setup(4, {1: "garbage"})
        with pytest.raises(ValueError):
            LeaderBasedDistribution(nodes, reg, range(10), np.random.default_rng(0))

    def test_oblivious_across_rounds(self):
        nodes, reg, net = setup(4, {4: "garbage"})
        dist = LeaderBasedDistribution(nodes, reg, range(1100), np.random.default_rng(2), net)
        for _ in range(3):
            if dist.step() is None:
                break
            snaps = json.loads(json.dumps([n.snapshot() for n in nodes], default=str))
            assert leaked_addresses(snaps, reg.addresses) == []
            inst = dist.session.instances[0]
            if dist.session.fallback:
                break
            dist.report_blocked(inst.pool[:20].tolist())


class TestDecentralized:
    def test_replicas_agree(self):
        nodes, reg, net = setup(4, {4: "equivocate"}, seed=3)
        dist = DecentralizedDistribution(nodes, reg, range(2048), net, random.Random(3))
        dist.step()
        honest = [n for n in nodes if n.honest]
        for n in honest[1:]:
            for a, b in zip(n.session.instances, honest[0].session.instances):
                assert np.array_equal(a.pool, b.pool)
                assert np.array_equal(a.assignment[:2048], b.assignment[:2048])
        assert dist.restarts >= 1 and 4 in dist.excluded

    def test_reconstruction_with_garbage(self):
        nodes, reg, net = setup(7, {6: "garbage", 7: "garbage"}, seed=1)
        dist = DecentralizedDistribution(nodes, reg, range(300), net, random.Random(1))
        net.reset()
        dist.step()
        for u in range(0, 300, 37):
            assert net.received[user_party(u)] == 7
            got = user_reconstruct(dist.inbox[u], reg.policy)
            assert got == {sid: reg.address_of(sid) for sid in dist.session.assignments_for(u)}

    def test_per_user_mode(self):
        nodes, reg, net = setup(4, seed=6)
        dist = DecentralizedDistribution(nodes, reg, range(1500), net, random.Random(6), per_user=True)
        for n in nodes:
            if n.honest:
                del n.session.instances[2:]  # keep the per-user agreement count small
        dist.step()
        assert not dist.session.fallback
        honest = [n for n in nodes if n.honest]
        for n in honest[1:]:
            for a, b in zip(n.session.instances, honest[0].session.instances):
                assert np.array_equal(a.assignment[:1500], b.assignment[:1500])

    def test_decentralized_assign_consistent(self):
        nodes, reg, net = setup(4, seed=8)
        dist = DecentralizedDistribution(nodes, reg, range(1500), net, random.Random(8))
        dist.step()
        msgs = decentralized_assign(nodes, 17, 2, network=net, rng=random.Random(1))
        assert len({m.secret_id for m in msgs.values()}) == 1
        sid = next(iter(msgs.values())).secret_id
        assert all(n.session.assignments_for(17)[2] == sid for n in nodes)
        got = user_reconstruct(msgs.values(), reg.policy)
        assert got == {sid: reg.address_of(sid)}

    def test_needs_four(self):
        nodes, reg, _ = setup(3)
        with pytest.raises(ValueError):
            DecentralizedDistribution(nodes, reg, range(10))

    def test_oblivious(self):
        nodes, reg, net = setup(4, {4: "garbage"}, seed=5)
        dist = DecentralizedDistribution(nodes, reg, range(1100), net, random.Random(5))
        for _ in range(3):
            if dist.step() is None:
                break
            snaps = json.loads(json.dumps([n.snapshot() for n in nodes], default=str))
            assert leaked_addresses(snaps, reg.addresses) == []
            if dist.session.fallback:
                break
            dist.report_blocked(dist.session.instances[1].pool[:20].tolist())
