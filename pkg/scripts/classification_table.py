"""dim A^p per degree for every built-in bundle, computed from scattering data."""
import argparse

from cuspidal.hodge import classification_report, classifier_from_pipeline
from cuspidal.scenarios import BUILTIN_NAMES, builtin


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--names", nargs="+", default=list(BUILTIN_NAMES))
    args = ap.parse_args(argv)
    for name in args.names:
        sf = builtin(name)
        inp = classifier_from_pipeline(sf.bundle, sf.model_for, sf.numerics, keep_scenarios=False)
        rep = classification_report(inp)
        dims = [d["dimAp"] for d in rep["degrees"]]
        line = f"{name:<16} n={sf.bundle.n}  dim A^p = {dims}"
        if "signature" in rep:
            sig = rep["signature"]
            line += f"  W+ = W- = {sig['dimWplus']}"
        print(line)


if __name__ == "__main__":
    main()
