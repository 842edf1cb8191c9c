"""Conduction-band electron dynamics in a 1D wire under localized excitations.

Static transmission from lattice Green's functions, time-dependent
propagation of the scattered wave with transparent boundaries or spectral
free flight, and the densities, currents and spectra derived from them.
"""

__version__ = "0.1.0"

from .core import (DomainError, Grid, GridError, PhysicalContext, PlaneWave, dispersion,
                   lattice_energy, wavenumber_from_energy)
from .fields import (BarrierSpec, PulseSpec, SwitchedBarrier, SwitchSpec, barrier_profile,
                     electric_field, ponderomotive_profile, switch_envelope, vector_potential)
from .negf import (CalibrationError, ConfigurationError, DiscreteHamiltonian,
                   EvanescentEnergyError, NumericalError, build_hamiltonian, calibrate_barrier,
                   lead_self_energy, scattering_state, transmission, transmission_curve)
from .observables import (CurrentTrace, DensityMap, Spectrum, current_canonical,
                          current_gauge_invariant, density, distance_D, power_spectrum,
                          superpose_currents, transmission_td)
from .tdse import (BoundaryKernel, CrankNicolson, ExtensionError, Sampling, WaveField,
                   free_flight_extend, propagate, source_term, step_cn)
