# Leader-based and fully decentralized distribution with a corrupt distributor.

from bridgedist.sim import SimConfig, run_trial

for mode in ("leader", "decentralized"):
    for behavior in ("garbage", "equivocate", "withhold"):
        cfg = SimConfig(n=1100, t=60, m=7, mode=mode, strategy="aggressive",
                        corrupt_distributors=2, distributor_behavior=behavior, seed=3)
        r = run_trial(cfg)
        print(f"{mode:14s} {behavior:10s} rounds={r.latency_rounds} success={r.success} "
              f"restarts={r.drg_restarts}")
        for rec in r.records:
            print(f"    round {rec.round}: each user got {rec.msgs_user} messages, "
                  f"busiest distributor {rec.msgs_dist}")
