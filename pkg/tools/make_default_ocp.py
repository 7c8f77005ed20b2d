"""Regenerate the default OCP tables shipped in src/spmbench/data.

Both curves are the LG M50 half-cell fits of Chen et al. (J. Electrochem. Soc.
167, 080534, 2020), the same expressions PyBaMM distributes. The grouped model
works in normalized stoichiometry s in [0, 1], so each fit is sampled on a
linear map x = x_lo + s * (x_hi - x_lo). The windows below were picked so that
the nominal charged state (s_neg = 0.9472, s_pos = 0.0188) rests at 4.2 V and a
full CCCV discharge to 2.5 V passes about 2.8 Ah. They are placeholders for the
unpublished curves of the identified cell.

    python tools/make_default_ocp.py
"""

from pathlib import Path

import numpy as np

N_POINTS = 401

# normalized s = 0 and s = 1 mapped onto the fit's own stoichiometry
GRAPHITE_WINDOW = (0.0177, 0.9510)
NMC_WINDOW = (0.2505, 0.9620)

OUT = Path(__file__).resolve().parents[1] / "src" / "spmbench" / "data"


def graphite_chen2020(x):
    return (
        1.9793 * np.exp(-39.3631 * x)
        + 0.2482
        - 0.0909 * np.tanh(29.8538 * (x - 0.1234))
        - 0.04478 * np.tanh(14.9159 * (x - 0.2769))
        - 0.0205 * np.tanh(30.4444 * (x - 0.6103))
    )


def nmc_chen2020(x):
    return (
        -0.8090 * x
        + 4.4875
        - 0.0428 * np.tanh(18.5138 * (x - 0.5542))
        - 17.7326 * np.tanh(15.7890 * (x - 0.3117))
        + 17.5842 * np.tanh(15.9308 * (x - 0.3120))
    )


def table(fn, window):
    s = np.linspace(0.0, 1.0, N_POINTS)
    u = fn(window[0] + s * (window[1] - window[0]))
    if np.any(np.diff(u) >= 0):
        raise SystemExit(f"{fn.__name__}: not strictly decreasing on {window}")
    return s, u


def write(path, s, u):
    with open(path, "w") as fh:
        fh.write("stoichiometry,potential_v\n")
        for x, v in zip(s, u):
            fh.write(f"{x:.6f},{v:.17g}\n")


def main():
    write(OUT / "ocp_graphite_default.csv", *table(graphite_chen2020, GRAPHITE_WINDOW))
    write(OUT / "ocp_nmc_default.csv", *table(nmc_chen2020, NMC_WINDOW))


if __name__ == "__main__":
    main()
