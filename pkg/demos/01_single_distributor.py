# A single distributor against a censor, round by round.
#
# 1024 users, 180 of them working for the censor.  Each round every user gets
# one bridge from each of the ceil(3 log2 n) = 30 instances.

import numpy as np

from bridgedist import Adversary, BridgeSupply, Prudent, Session

session = Session(range(1024), BridgeSupply(), np.random.default_rng(1))
censor = Adversary(180, Prudent())
rng = np.random.default_rng(2)

print("instances:", session.L)

tick = 0
while True:
    tick += 1
    plan = session.advance_round_if_triggered()
    if plan is None:
        break
    censor.corrupt_step(session, rng, tick)
    blocked = censor.decide_blocks(session, rng)
    session.report_blocked(blocked)
    print(f"round {plan.round}: pool {plan.d:5d}  fallback={plan.fallback}  "
          f"blocked now {len(blocked):4d}  bridges used {session.bridges_used}")
    if session.fallback:
        break

# every honest user still holds something that works
honest = np.array([u for u in session.users if u not in censor.corrupted])
print("honest users without a working bridge:", int((~session.has_unblocked(honest)).sum()))

# With n = 1024 pools of 64 already cover n / L, so the second round hands
# out one private bridge per user instead of a bigger pool.
