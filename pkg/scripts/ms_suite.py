"""Maass-Selberg defect table over the built-in scenarios."""
import argparse

from cuspidal.errors import ScenarioError
from cuspidal.msrel import ms_grid
from cuspidal.residues import pole_scan
from cuspidal.scenarios import BUILTIN_NAMES, builtin


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tau", type=float, nargs="+", default=[0.03, 0.09])
    ap.add_argument("--r", type=float, nargs="+", default=[2.0, 5.0, 10.0])
    ap.add_argument("--names", nargs="+", default=list(BUILTIN_NAMES))
    args = ap.parse_args(argv)
    print(f"{'scenario':<16} {'rows':>4} {'refused':>7} {'max rel error':>14}")
    for name in args.names:
        sf = builtin(name)
        scn = sf.scenario()
        try:
            poles = pole_scan(scn).poles if 2 * scn.k < scn.bundle.f else []
            rows = ms_grid(scn, args.tau, args.r, sf.phi(scn), poles=poles)
        except ScenarioError as exc:
            print(f"{name:<16} skipped: {exc}")
            continue
        ok = [m.rel_error for m in rows if m.rel_error == m.rel_error]
        print(f"{name:<16} {len(rows):4d} {len(rows) - len(ok):7d} {max(ok, default=float('nan')):14.2e}")


if __name__ == "__main__":
    main()
