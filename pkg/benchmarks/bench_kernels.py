"""Compare the numba kernels with the pure-Python fallback.

Each backend runs in its own interpreter because the switch is read at
import time. Prints timings and checks that both backends pick the same arms.

    python3 benchmarks/bench_kernels.py [--horizon 2000] [--quantiles 20000]
"""
import argparse
import hashlib
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from cvbandit import backend, percentile_v, run_policy
from cvbandit.environments import Environment, arm_from_dict, gaussian_suite
from cvbandit.stats_core import RandomSource

horizon, n_q = int(sys.argv[1]), int(sys.argv[2])
out = {"backend": backend()}

# warm-up compiles (and loads the cache) outside the timed region
percentile_v(10, 2.0, 3)
env = Environment([arm_from_dict(a) for a in gaussian_suite()], RandomSource(0))
x, w = env.draw_streams(horizon)
run_policy("UCBwSI", x[:40], w[:40], env.si_means)

g = np.random.default_rng(1)
ts = g.integers(2, 10**5, n_q)
dofs = g.integers(1, 5000, n_q)
t0 = time.perf_counter()
vals = [percentile_v(int(t), 2.0, int(d)) for t, d in zip(ts, dofs)]
out["percentile_v_us"] = (time.perf_counter() - t0) / n_q * 1e6
out["percentile_v_sum"] = float(np.sum(vals))

for kind in ("UCBwSI", "UCBwSI-Split", "UCB-V"):
    t0 = time.perf_counter()
    arms, _ = run_policy(kind, x, w, env.si_means)
    out[kind + "_s"] = time.perf_counter() - t0
    out[kind + "_arms"] = arms.tolist()
print(json.dumps(out))
"""


def run_child(disable, horizon, n_q):
    env = dict(os.environ)
    if disable:
        env["CVBANDIT_DISABLE_NUMBA"] = "1"
    else:
        env.pop("CVBANDIT_DISABLE_NUMBA", None)
    p = subprocess.run([sys.executable, "-c", CHILD, str(horizon), str(n_q)], env=env,
                       capture_output=True, text=True, check=True)
    return json.loads(p.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=int, default=2000)
    ap.add_argument("--quantiles", type=int, default=20000)
    args = ap.parse_args(argv)

    fast = run_child(False, args.horizon, args.quantiles)
    slow = run_child(True, args.horizon, args.quantiles)
    print(f"{'kernel':<26}{'numba':>12}{'python':>12}{'speedup':>10}")
    print(f"{'percentile_v (us/call)':<26}{fast['percentile_v_us']:>12.2f}{slow['percentile_v_us']:>12.2f}"
          f"{slow['percentile_v_us'] / fast['percentile_v_us']:>9.1f}x")
    for kind in ("UCBwSI", "UCBwSI-Split", "UCB-V"):
        f, s = fast[kind + "_s"], slow[kind + "_s"]
        print(f"{kind + f' T={args.horizon} (s)':<26}{f:>12.3f}{s:>12.3f}{s / f:>9.1f}x")
    agree = all(fast[k + "_arms"] == slow[k + "_arms"] for k in ("UCBwSI", "UCBwSI-Split", "UCB-V"))
    dv = abs(fast["percentile_v_sum"] - slow["percentile_v_sum"]) / abs(slow["percentile_v_sum"])
    digest = hashlib.sha256(json.dumps(fast["UCBwSI_arms"]).encode()).hexdigest()[:12]
    print(f"arm sequences identical: {agree} (UCBwSI digest {digest}); percentile sums rel diff {dv:.1e}")
    return 0 if agree else 1


if __name__ == "__main__":
    sys.exit(main())
