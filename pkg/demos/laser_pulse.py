"""Current response to a localized laser pulse.

A ten-cycle 800 nm pulse acts on an 80 nm stretch of wire carrying a 54 meV
current. After the pulse the wavefunction flies freely, which is evaluated
spectrally on an extended box. The current at a probe downstream shows two
spectral humps: one at the laser frequency and a stronger one near zero
frequency from the ponderomotive push. The electron's own frequency is absent.

    python demos/laser_pulse.py      (about 10 s)
"""

from pathlib import Path

from wiredyn import PhysicalContext, PulseSpec
from wiredyn.fields import ponderomotive_profile
from wiredyn.scenarios import load_config, run

here = Path(__file__).parent
cfg = load_config(here.parent / "configs" / "pulse.yaml",
                  ["pulse.length_nm=80", f"output.directory={here / 'out' / 'laser_pulse'}"])
pulse = PulseSpec.from_cycles(10, length=80.0)
ctx = PhysicalContext()
u_p = ponderomotive_profile(pulse, ctx, 40.0, 0.5 * pulse.tau)
print(f"tau = {pulse.tau:.2f} fs, omega0 = {pulse.omega0:.4f} /fs, peak U_p = {u_p * 1e3:.3f} meV")

result = run("pulse", cfg)
entry = result.summary["L80nm_E54meV"]
info = entry["x160nm"]
print(f"CN while the pulse is on: {entry['timings_s']['cn']:.1f} s, "
      f"free flight: {entry['timings_s']['spectral']:.1f} s")
print(f"humps at omega = {', '.join(f'{w:.4f}' for w in info['peak_omegas'])} /fs")
print(f"carrier hump power        {info['carrier_power']:.3e}")
print(f"low-frequency hump power  {info['low_power']:.3e}")
print(f"power at omega(k) = {entry['omega_k_per_fs']:.4f} /fs: {info['power_at_omega_k']:.3e}")
