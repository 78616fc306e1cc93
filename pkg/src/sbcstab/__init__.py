"""Periodic simultaneous binary collision orbits in symmetric four-body
problems and their symmetry-reduced linear stability."""
from ._backend import BACKEND
from .errors import (BlockStructureError, BracketInvalid, CollisionSingularity,
                     DegenerateTangent, IntegrationError, MaxStepsExceeded, NewtonDiverged,
                     NoEventFound, ResidualExceeded, SBCError, SingularMatrixError,
                     StepUnderflow, TotalCollapse)
from .integrate import (ORBIT_CONFIG, VARIATIONAL_CONFIG, IntegratorConfig, Trajectory,
                        integrate, integrate_to_event, integrate_with_variational, propagate)
from .collinear import CollinearSystem
from .planar import PlanarSeed, PlanarSystem
from .orbits import (PeriodicOrbit, ShootingConfig, continue_family, solve_collinear,
                     solve_planar)
from .stability import (ScanRow, StabilityReport, analyze, build_Y0_collinear,
                        build_Y0_planar, critical_mass, mass_scan, verify_factorization)

__version__ = "0.1.0"
