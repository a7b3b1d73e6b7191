"""Integrate 0-100 km/h sprints and sweep cell count to find the knee.

Adding parallel strings raises peak power but also mass; past a knee the
extra cells stop buying acceleration. Writes the sweep as CSV and SVG under
demo_output/.
"""

import csv
from pathlib import Path

from evperf import accel_time_0_100, default_pack, default_vehicle, diminishing_returns_sweep, total_mass
from evperf.figures import scatter
from evperf.physics import DEFAULT_SWEEP_PARALLEL

out_dir = Path(__file__).resolve().parent.parent / "demo_output"
out_dir.mkdir(exist_ok=True)

vehicle = default_vehicle()
pack = default_pack()

print("== single vehicle ==")
print(f"total mass : {total_mass(vehicle, pack):7.1f} kg")
print(f"0-100 km/h : {accel_time_0_100(vehicle, pack):7.2f} s")

print("\n== cell-count sweep (diminishing returns) ==")
curve = diminishing_returns_sweep(vehicle, pack, DEFAULT_SWEEP_PARALLEL)
prev = None
for cells, seconds in curve[::4]:
    gain = "" if prev is None else f"  (improvement {prev - seconds:+.2f} s)"
    print(f"{cells:6d} cells -> {seconds:6.2f} s{gain}")
    prev = seconds

best_cells, best_time = min(curve, key=lambda item: item[1])
print(f"\nfastest configuration: {best_cells} cells at {best_time:.2f} s;")
print("beyond it the added mass outweighs the added power.")

with open(out_dir / "sweep.csv", "w", newline="") as fh:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["cell_count", "seconds_0_100"])
    writer.writerows(curve)
(out_dir / "sweep.svg").write_text(
    scatter(
        [c for c, _ in curve],
        [t for _, t in curve],
        "0-100 km/h time vs total cell count",
        xlabel="cell count",
        ylabel="seconds",
    )
)
print(f"wrote {out_dir / 'sweep.csv'} and sweep.svg")
