"""One-shot lower/upper bounds and the second-order rate on the dephasing family."""

import argparse
import math

from entrocap import capacity as cap
from entrocap.broadcast import dephasing_broadcast


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--params", type=float, nargs="+", default=[0.1, 0.3, 0.5])
    a = p.parse_args(argv)
    eps, delta = a.eps, a.delta
    print(f"{'p':>5} {'thm1':>10} {'thm2(M=2)':>10} {'thm3':>10} {'I(R;B)-I(R;E)':>14} "
          f"{'2nd/n n=1e2':>12} {'2nd/n n=1e4':>12}")
    for x in a.params:
        bc = dephasing_broadcast(x)
        rho = cap.maximally_entangled_input(bc)
        t1 = cap.thm1_lower_bound(bc, rho, eps, delta, eps / 2, math.sqrt(delta) / 2).value
        t2 = cap.thm2_upper_bound(bc, cap.code_state(bc, rho, 2), eps, delta).value
        try:
            t3 = cap.thm3_upper_bound(bc, rho, eps, delta).value
        except ValueError:
            t3 = float("nan")
        so = [cap.second_order_rate(bc, rho, eps, delta, n) for n in (100, 10 ** 4)]
        diff = so[0].terms["I(R;B)"] - so[0].terms["I(R;E)"]
        print(f"{x:5.2f} {t1:10.4f} {t2:10.4f} {t3:10.4f} {diff:14.6f} "
              f"{so[0].value / 100:12.6f} {so[1].value / 1e4:12.6f}")


if __name__ == "__main__":
    main()
