"""Write the channel and state JSON fixtures under data/."""

from pathlib import Path

import numpy as np

from entrocap import broadcast as br
from entrocap import linalg as la
from entrocap.io import channel_to_spec, dumps, state_to_spec
from entrocap.qip import DensityOperator, Register

ROOT = Path(__file__).resolve().parent.parent / "data"


def write(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj) + "\n")
    print(path.relative_to(ROOT.parent))


def main():
    ch = ROOT / "channels"
    write(ch / "identity_trivial_eve.json", channel_to_spec(br.identity_with_trivial_eve(2)))
    write(ch / "compromised_lab_identity.json", channel_to_spec(br.compromised_lab(br.identity_with_trivial_eve(2))))
    write(ch / "ad_gamma_0.25.json", channel_to_spec(br.amplitude_damping_stinespring(0.25)))
    write(ch / "ad_gamma_0.75.json", channel_to_spec(br.amplitude_damping_stinespring(0.75)))
    write(ch / "dephasing_0.3.json", channel_to_spec(br.dephasing_broadcast(0.3)))
    write(ch / "ad_zoo.json", {"name": "amplitude damping (zoo)",
                               "zoo": {"name": "amplitude_damping_stinespring", "params": {"gamma": 0.5}}})

    st = ROOT / "states"
    write(st / "omega.json", state_to_spec(DensityOperator(la.proj(la.ket(0, 2)), Register(("A",), (2,)))))
    write(st / "tau.json", state_to_spec(DensityOperator(np.eye(2) / 2, Register(("A",), (2,)))))
    write(st / "bell.json", state_to_spec(DensityOperator(la.proj(la.max_entangled(2)), Register(("A", "B"), (2, 2)))))


if __name__ == "__main__":
    main()
