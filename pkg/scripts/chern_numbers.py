"""Print every Chern-number pipeline side by side."""

import argparse
import math
import time

from qgtquench import chern
from qgtquench.chern import QuenchSettings, SphereGrid
from qgtquench.config import _default_threads
from qgtquench.models import ModelSpec
from qgtquench.quench import Schedule


def show(label, fn):
    t0 = time.perf_counter()
    r = fn()
    extra = f" mod2={r.mod2}" if r.mod2 is not None else ""
    print(f"{label:<38s} {r.value:+.6f}{extra}  ({time.perf_counter() - t0:.1f}s)")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--skip-second-quench", action="store_true", help="skip the slowest pipeline")
    ap.add_argument("--threads", type=int, default=_default_threads())
    args = ap.parse_args(argv)
    kw = {"threads": args.threads}

    dirac, yang = ModelSpec("dirac3d-eff"), ModelSpec("yang-eff")
    q3 = QuenchSettings(math.pi / 100, Schedule("linear", 0.001))
    q5 = QuenchSettings(math.pi / 80, Schedule("linear", 0.001))

    show("C_R curvature (analytic)", lambda: chern.real_chern_from_curvature(dirac))
    show("C_R curvature (FD oracle)", lambda: chern.real_chern_from_curvature(dirac, source="fd", **kw))
    show("C_R metric (analytic)", lambda: chern.real_chern_from_metric(dirac))
    show("C_R metric (quench)", lambda: chern.real_chern_from_metric(dirac, source="quench", settings=q3, **kw))
    show("C_R curvature, opposite monopole",
         lambda: chern.real_chern_from_curvature(ModelSpec("dirac3d-eff", sign=-1)))
    show("C2 curvature (analytic)", lambda: chern.second_chern_from_curvature(yang))
    show("C2 curvature (FD oracle, 12^4)",
         lambda: chern.second_chern_from_curvature(yang, SphereGrid("S4", (12,) * 4), "fd", **kw))
    show("C2 metric (FD oracle, calibrated)", lambda: chern.second_chern_from_metric(yang, source="fd", **kw))
    show("C2 metric (analytic, printed coeff)",
         lambda: chern.second_chern_from_metric(yang, source="analytic", normalization="paper-printed"))
    if not args.skip_second_quench:
        show("C2 metric (quench, calibrated)",
             lambda: chern.second_chern_from_metric(yang, source="quench", settings=q5, **kw))


if __name__ == "__main__":
    main()
