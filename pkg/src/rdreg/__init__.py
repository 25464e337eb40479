"""Output regulation for a 1-D reaction-diffusion plant with boundary input
delay and unknown-frequency harmonic disturbances: modal reduction,
certified gain design, regulator-equation solvers, dual observers, the
tracking-error feedback law, and a closed-loop finite-difference simulator.
"""

from importlib import resources

from ._backend import HAVE_NUMBA, resolve_backend
from .exo import CanonicalHarmonic, ExoSpec, canonical_transform, check_observable, harmonic_from_gamma
from .modal import ModalBasis, build_basis, min_truncation, project
from .numkit import GridFunction, expm2, lyap_solve, psd_project, quad, sym_eig
from .plantsim import DelayLine, PdeState, PlantSimulator, PlantSpec
from .regeq import (
    RegulatorMaps,
    build_injection_profile,
    build_regulator_maps,
    solve_controller_map,
    solve_observer_decoupler,
    solve_regulator_profile,
)
from .regulator import (
    AdaptiveObserver,
    ClosedLoopTrace,
    ControllerConfig,
    StateObserver,
    control_law,
    feedforward_law,
    run_closed_loop,
)
from .synthesis import (
    GainCertificate,
    ReducedModel,
    build_phi,
    build_reduced,
    certify_controller,
    certify_observer,
    design_k,
    design_l,
    load_certificate,
    save_certificate,
    verify_certificate,
)

__version__ = "0.1.0"


def bundled_scenario_path(name):
    """Filesystem path of a packaged scenario config (e.g. 'paper_a15')."""
    return resources.files(__package__) / "scenarios" / f"{name}.cfg"
