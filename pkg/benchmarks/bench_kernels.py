"""Compare the compiled kernels with the interpreted fallback.

Each workload runs in a fresh interpreter, once with the JIT path and once
with ``FINITEDECOY_DISABLE_JIT=1``.  The first call of every workload is
timed separately so that compilation (or cache loading) is visible.

Usage::

    python benchmarks/bench_kernels.py [--repeat 3]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKLOADS = {
    "pp_exact_500": (
        "import numpy as np\n"
        "from finitedecoy import stats_bounds as sb\n"
        "ns = np.arange(1, 501)\n"
        "def run():\n"
        "    for p in (0.05, 0.25, 0.5, 0.75, 0.95):\n"
        "        sb.percent_points_batch(ns, p, 1e-3, 'exact')\n"
    ),
    "interval_kl_500": (
        "from finitedecoy import stats_bounds as sb\n"
        "def run():\n"
        "    sb.interval_limits_all(500, 1e-3, 'chernoff-kl')\n"
    ),
    "interval_exact_500": (
        "from finitedecoy import stats_bounds as sb\n"
        "def run():\n"
        "    sb.interval_limits_all(500, 1e-3, 'exact')\n"
    ),
    "pipeline_reference": (
        "from finitedecoy.keyrate import RateSetup\n"
        "setup = RateSetup(method='chernoff-kl')\n"
        "def run():\n"
        "    setup.evaluate()\n"
    ),
    "pipeline_exact_1e7": (
        "from finitedecoy.channel_sim import ChannelModel, expected_counts\n"
        "from finitedecoy.estimation import ProtocolParams, pipeline\n"
        "from finitedecoy.photon_source import Fixed\n"
        "m = ChannelModel(2e-3, 4e-7, 0.03, Fixed(0.1), Fixed(0.5))\n"
        "p = ProtocolParams(10, Fixed(0.1), Fixed(0.5), 10**7, 10**7, 10**7, 10**8)\n"
        "c = expected_counts(m, p)\n"
        "def run():\n"
        "    pipeline(p, c, method='exact')\n"
    ),
}

_TIMER = (
    "import json, time\n"
    "t0 = time.perf_counter(); run(); first = time.perf_counter() - t0\n"
    "best = float('inf')\n"
    "for _ in range({repeat}):\n"
    "    t0 = time.perf_counter(); run(); best = min(best, time.perf_counter() - t0)\n"
    "print(json.dumps({{'first': first, 'best': best}}))\n"
)


def _measure(setup: str, repeat: int, disable_jit: bool) -> dict:
    env = dict(os.environ)
    env["FINITEDECOY_DISABLE_JIT"] = "1" if disable_jit else "0"
    code = setup + _TIMER.format(repeat=repeat)
    out = subprocess.run([sys.executable, "-c", code], env=env, check=True,
                         capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3, help="timed repetitions after the first call")
    ap.add_argument("--only", nargs="*", choices=sorted(WORKLOADS), help="subset of workloads")
    args = ap.parse_args(argv)
    names = args.only or list(WORKLOADS)
    head = f"{'workload':<22}{'jit first':>12}{'jit best':>12}{'pure best':>12}{'speedup':>10}"
    print(head)
    print("-" * len(head))
    for name in names:
        jit = _measure(WORKLOADS[name], args.repeat, disable_jit=False)
        pure = _measure(WORKLOADS[name], args.repeat, disable_jit=True)
        speedup = pure["best"] / jit["best"] if jit["best"] > 0 else float("inf")
        print(f"{name:<22}{jit['first']:>11.4f}s{jit['best']:>11.4f}s"
              f"{pure['best']:>11.4f}s{speedup:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
