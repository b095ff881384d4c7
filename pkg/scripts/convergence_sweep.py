"""Error of the quench real Chern number against T and delta-lambda."""

import argparse
import math

from qgtquench import chern
from qgtquench.chern import QuenchSettings, SphereGrid
from qgtquench.models import ModelSpec
from qgtquench.quench import Schedule


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, nargs=2, default=[50, 50])
    ap.add_argument("--time-unit", choices=["two-pi", "one"], default="two-pi")
    args = ap.parse_args(argv)
    spec, grid = ModelSpec("dirac3d-eff"), SphereGrid("S2", tuple(args.grid))

    def run(dl, T):
        s = QuenchSettings(dl, Schedule("linear", T, time_unit=args.time_unit))
        return chern.real_chern_from_metric(spec, grid, "quench", settings=s).value

    print("T sweep at dlam = pi/100")
    for T in (0.05, 0.01, 0.005, 0.001):
        v = run(math.pi / 100, T)
        print(f"  T={T:<7g} C_R={v:.6f}  |C_R-1|={abs(v - 1):.2e}")
    print("dlam sweep at T = 0.001")
    for k in (10, 20, 50, 100, 200):
        v = run(math.pi / k, 0.001)
        print(f"  dlam=pi/{k:<4d} C_R={v:.6f}  |C_R-1|={abs(v - 1):.2e}")


if __name__ == "__main__":
    main()
