"""A barrier switched on under a steady current.

A 2 nm barrier calibrated to T = 1/2 is ramped up in 5 fs. The density ahead
of the barrier depletes behind a front that moves at the band velocity, the
transmitted current relaxes to its static value and the distance to the
steady density decays once the first packets leave the observed region.

    python demos/switch_on.py        (about 20 s)

Writes CSV and SVG files to demos/out/switch_on.
"""

from pathlib import Path

from wiredyn.plotting import render_directory
from wiredyn.scenarios import load_config, run

here = Path(__file__).parent
cfg = load_config(here.parent / "configs" / "switch_on.yaml",
                  [f"output.directory={here / 'out' / 'switch_on'}"])
result = run("switch", cfg)
s = result.summary["E54meV"]

print(f"calibrated height        {s['phi_max_V'] * 1e3:.2f} mV (static T = {s['T_static']:.6f})")
probe = [k for k in s if k.startswith("T_late_x")][0]
print(f"late transmission        {s[probe]:.4f} at {probe[len('T_late_x'):]}")
print(f"front speed / v_k        {s['front_speed_nm_per_fs'] / s['velocity_nm_per_fs']:.3f}")
print(f"D(t) settles (L1, 5%)    after {s['settle_time_l1_fs']:.0f} fs; "
      f"packets leave the region at {s['exit_time_fs']:.0f} fs")

for path in render_directory(result.directory):
    print("wrote", path)
