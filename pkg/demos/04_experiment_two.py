# Latency and bridges used as the censor grows, n = 1024 (a coarse sweep).

import sys

from bridgedist.sim import SimConfig, emit_csv, latency_bound, run_experiment

configs = [SimConfig(n=1024, t=t, strategy=s, trials=5)
           for s in ("prudent", "aggressive", "stochastic")
           for t in range(0, 1024, 64)]
table = run_experiment(configs)

for row in table:
    print(f"{row['strategy']:10s} t={row['t']:4d}  rounds {row['round_mean']:.1f} "
          f"(formula {latency_bound(row['t'])})  used {row['used_mean']:.0f}")

emit_csv(table, sys.stdout)
