"""Closed-form cavity: pipeline T(s) against the mpmath oracle on a rectangle."""
import argparse
import sys
import time
from pathlib import Path

import numpy as np

from cuspidal.scatter import solve_batch
from cuspidal.scenarios import builtin

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
import oracles  # noqa: E402


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nre", type=int, default=20)
    ap.add_argument("--nim", type=int, default=10)
    ap.add_argument("--im", type=float, default=0.3)
    args = ap.parse_args(argv)
    scn = builtin("closed-form").scenario()
    s = (np.linspace(0.5, 1.2, args.nre)[:, None]
         + 1j * np.linspace(-args.im, args.im, args.nim)[None]).ravel()
    t0 = time.perf_counter()
    data = solve_batch(scn, [scn.point(z) for z in s])
    dt = time.perf_counter() - t0
    rel = np.array([abs(d.T[scn.inc][0, 0] - complex(oracles.t_closed(z))) / abs(complex(oracles.t_closed(z)))
                    for z, d in zip(s, data)])
    j = int(np.argmax(rel))
    print(f"{s.size} points, pipeline time {dt:.3f} s")
    print(f"max rel error {rel[j]:.2e} at s = {s[j]:.4f}, median {np.median(rel):.2e}")


if __name__ == "__main__":
    main()
