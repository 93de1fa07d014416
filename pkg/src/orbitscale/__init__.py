"""Periodic orbits, scaling transformations and spectral recurrence analysis."""

from .dynamics import (
    Domain,
    HamiltonianSpec,
    PhaseState,
    PotentialTerm,
    Trajectory,
    box_spec,
    coulomb_spec,
    coulomb_term,
    diamagnetic_kepler_spec,
    evaluate_energy,
    integrate,
    oscillator_spec,
    oscillator_xy_term,
    power_spec,
    power_term,
    reference_integrate,
    sqrt_reparametrize,
)
from .orbits import (
    CatalogEntry,
    OrbitCatalog,
    PeriodicOrbit,
    ds_de_check,
    find_orbit_1d,
    integrate_closed_orbit,
    orbit_invariants,
    rectangle_orbit_lengths,
)
from .oscillations import (
    RecurrencePeaks,
    ScaledVariableMap,
    local_energy_period,
    map_variable,
    match_orbits,
    oscillatory_dos,
    recurrence_spectrum,
)
from .qspec import SpectrumResult, analytic_spectrum, fd_spectrum_1d, truncation_interval
from .scaling import (
    ScalingResult,
    characteristic_length,
    level_loci,
    scale_coupling,
    scale_homogeneous,
    scale_mixed,
    transmute_length,
    virial_residual,
)

__version__ = "0.1.0"
