"""Pole location and residue of a constant well against its 1-d root, over a range of depths."""
import argparse

import mpmath as mp

from cuspidal.residues import contour_residue, pole_scan
from cuspidal.scenarios import ScenarioFile, builtin_doc


def well(depth):
    doc = builtin_doc("tuned-well")
    doc["model"]["V"]["matrix"] = [[-depth]]
    return ScenarioFile(doc).scenario()


def oracle_pole(depth, d=0.5):
    """Root of (d - s) = kappa cot(kappa) on (d, 2d), kappa^2 = depth + lambda - d^2."""
    def g(s):
        lam = s * (2 * d - s)
        k = mp.sqrt(depth + lam - d * d)
        return (d - s) - k * mp.cot(k)
    return float(mp.findroot(g, (d + 1e-6, 2 * d), solver="anderson"))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--depths", type=float, nargs="+", default=[2.6, 2.8, 3.1, 3.4])
    args = ap.parse_args(argv)
    print(f"{'depth':>6} {'pole':>18} {'oracle':>18} {'offset':>9} {'residue':>12}")
    for v in args.depths:
        scn = well(v)
        found = pole_scan(scn).poles
        if not found:
            print(f"{v:6.2f} {'no pole in (d, 2d)':>18}")
            continue
        s0 = found[0]
        ref = oracle_pole(v)
        c = contour_residue(scn, s0).C[0, 0].real
        print(f"{v:6.2f} {s0:18.15f} {ref:18.15f} {abs(s0 - ref):9.1e} {c:12.9f}")


if __name__ == "__main__":
    main()
