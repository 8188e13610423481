"""Space-time random measures: integrability conditions, Lévy bases and ambit fields."""

from .errors import *  # noqa: F401,F403
from .quadrature import QuadConfig, Verdict, bimeasure_integral, integrate_improper, integrate_jump
from .measures import (CharacteristicTriplet, Colored, ControlMeasure, JumpMeasureSpec,
                       Orthogonal, Region, SpaceMeasure, TimeMeasure, TripletFlags,
                       TruncationFunction, levy_khintchine_exponent, retruncate,
                       validate_triplet)
from .integrability import (IntegrabilityReport, IntegrandSpec, check_condition_drift,
                            check_condition_gaussian, check_condition_jump, check_integrable,
                            u_tilde)
from .basis import BasisRealization, GridSpec, empirical_cf, simulate_levy_basis
from .pushforward import (NullSpatialTriplet, cf_distance, pushforward_characteristics,
                          simple_integral, simulate_path_integral)
from .ambit import (KernelSpec, check_heatex, classify_colored_example, evaluate_ambit,
                    heat_green, heat_lp_verdict)
from .volmod import (CogarchParams, SupCogarchParams, check_supcog_existence, phi_max,
                     simulate_cogarch, simulate_supcogarch)

__version__ = "0.1.0"
