"""Numba kernels vs the pure-Python fallback.

Each backend runs in its own interpreter because the switch
(SEACGD_DISABLE_NUMBA) is read at import time. Both must produce the same
final objective value; the table reports wall time per phase.

    python3 benchmarks/bench_kernels.py [--iters N] [--dim D] [--workers W]
"""
import argparse
import json
import os
import subprocess
import sys
import time

CHILD = r"""
import json, sys, time
import numpy as np
from seacgd._accel import backend_name
from seacgd.objective import PaperQuartic
from seacgd.runtime import DelayModel, audit_log, build_runtime

n, d, W = int(sys.argv[1]), int(sys.argv[2]), int(sys.argv[3])
obj = PaperQuartic(d)
x0 = obj.point(1.3, -0.5)
out = {"backend": backend_name()}

def make(mode="async"):
    rt = build_runtime(obj, W, eta=1e-4, tau=2 * W, mode=mode, sample_every=1000,
                       delay_model=DelayModel.exponential(0.05, seed=1))
    return rt.start(x0)

# warm-up compiles (or loads cached) kernels outside the timed region
make().advance(2 * W)
make("sync").advance(2)

rt = make()
t = time.perf_counter(); rt.advance(n); out["async_s"] = time.perf_counter() - t
out["async_f"] = rt.f
t = time.perf_counter(); rep = audit_log(rt.events, 2 * W); out["audit_s"] = time.perf_counter() - t
out["audit_ok"] = rep.ok
rs = make("sync")
t = time.perf_counter(); rs.advance(n // W); out["sync_s"] = time.perf_counter() - t
out["sync_f"] = rs.f
print(json.dumps(out))
"""


def run(backend, n, d, W):
    env = dict(os.environ)
    env["SEACGD_DISABLE_NUMBA"] = "1" if backend == "python" else "0"
    res = subprocess.run([sys.executable, "-c", CHILD, str(n), str(d), str(W)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iters", type=int, default=200_000)
    ap.add_argument("--dim", type=int, default=1_000_000)
    ap.add_argument("--workers", type=int, default=8)
    args = ap.parse_args()
    rows = {b: run(b, args.iters, args.dim, args.workers) for b in ("numba", "python")}
    print(f"{args.iters} async iterations, d={args.dim}, W={args.workers}")
    print(f"{'phase':<8}{'numba [s]':>12}{'python [s]':>12}{'speed-up':>10}")
    for key in ("async_s", "sync_s", "audit_s"):
        a, b = rows["numba"][key], rows["python"][key]
        print(f"{key[:-2]:<8}{a:>12.4f}{b:>12.4f}{b / max(a, 1e-12):>10.1f}")
    same = rows["numba"]["async_f"] == rows["python"]["async_f"] and rows["numba"]["sync_f"] == rows["python"]["sync_f"]
    print("final f identical across backends:", same)
    print("audit ok:", rows["numba"]["audit_ok"] and rows["python"]["audit_ok"])
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
