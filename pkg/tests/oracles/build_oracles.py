"""Regenerate the frozen oracle values in ``frozen.json``.

Every number here comes from a closed-form solution or from quadrature over
an exact solution; nothing is read back from a numerical flow.  Run with
``python3 tests/oracles/build_oracles.py`` and review the diff.
"""

import json
import math
from pathlib import Path

from mcflab.diagnostics import reference_densities


def sphere_measure(k):
    return 2 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


def main():
    out = {
        "extinction": {
            "circle_R1": 0.5,
            "sphere_n2_R1": 0.25,
            "sphere_n3_R1": 1.0 / 6.0,
            "cylinder_n2_R1": 0.5,
        },
        "sphere_n2_radius": {f"{t:.2f}": math.sqrt(1 - 4 * t) for t in (0.0, 0.05, 0.1, 0.15, 0.2, 0.24)},
        "grim_reaper_height": {"t0_p0": 0.0, "t1_p0": 1.0, "t0_pi3": math.log(2.0)},
        "circles_gap_t03": math.sqrt(3.4) - math.sqrt(0.4),
        "circle_density": math.sqrt(2 * math.pi / math.e),
        "cutoff_center_tau": 3.375,
        "reference_densities": {
            str(n): {k: v["value"] for k, v in reference_densities(n).items()} for n in (1, 2, 3)
        },
        "closed_form_densities": {
            str(n): {
                "sphere": sphere_measure(n) * (n / (2 * math.pi * math.e)) ** (n / 2),
                **({"cylinder_1": sphere_measure(n - 1) * ((n - 1) / (2 * math.pi * math.e)) ** ((n - 1) / 2)} if n > 1 else {}),
            }
            for n in (1, 2, 3)
        },
        "andrews": {"circle": 1.0, "sphere_n2_R2": 2.0},
    }
    path = Path(__file__).with_name("frozen.json")
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
