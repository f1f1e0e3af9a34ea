/// Standalone matplotlib script drawing the states and the active mode
/// from the two CSV files written next to it.
pub fn plot_script(traj_file: &str, switches_file: &str) -> String {
    format!(
        r#"#!/usr/bin/env python3
# Plots states and active mode. Usage: python3 <this file> [output.png]
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
TRAJ = os.path.join(HERE, "{traj_file}")
SWITCHES = os.path.join(HERE, "{switches_file}")


def main():
    with open(TRAJ, newline="") as f:
        rows = list(csv.DictReader(f))
    t = [float(r["t"]) for r in rows]
    states = [k for k in rows[0] if k.startswith("x")] if rows else []
    fig, (ax_x, ax_s) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    for k in states:
        ax_x.plot(t, [float(r[k]) for r in rows], label=k)
    ax_x.set_ylabel("state")
    ax_x.legend(loc="upper right")
    ax_x.grid(True)
    ax_s.step(t, [int(r["sigma"]) for r in rows], where="post")
    ax_s.set_ylabel("sigma")
    ax_s.set_xlabel("t [s]")
    ax_s.grid(True)
    if os.path.exists(SWITCHES):
        with open(SWITCHES, newline="") as f:
            n = sum(1 for _ in csv.DictReader(f))
        ax_s.set_title(f"{{n}} switches")
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(HERE, "trajectory.png")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    print(out)


if __name__ == "__main__":
    main()
"#
    )
}
