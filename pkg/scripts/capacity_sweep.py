"""P_EA and degradability along the amplitude-damping and dephasing families; writes CSV to stdout."""

import argparse
import csv
import sys

import numpy as np

from entrocap import capacity as cap
from entrocap.broadcast import amplitude_damping_stinespring, check_degraded, dephasing_broadcast


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--points", type=int, default=11)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args(argv)
    opts = cap.CapacityOptions(restarts=a.restarts, seed=a.seed, check_degraded=False)
    w = csv.writer(sys.stdout)
    w.writerow(["family", "param", "degraded", "dual_margin", "P_EA", "I(R;B)", "I(R;E)", "grad_norm"])
    for family, make in (("amplitude_damping", amplitude_damping_stinespring), ("dephasing", dephasing_broadcast)):
        for x in np.linspace(0, 1, a.points):
            bc = make(float(x))
            d = check_degraded(bc)
            r = cap.ea_private_information(bc, opts)
            w.writerow([family, f"{x:.3f}", d.degraded, f"{d.dual_margin:.3e}", f"{r.value:.8f}",
                        f"{r.terms['I(R;B)']:.8f}", f"{r.terms['I(R;E)']:.8f}", f"{r.gradient_norm_at_opt:.1e}"])
            sys.stdout.flush()


if __name__ == "__main__":
    main()
