"""Anisotropic-wavefront channel modeling and matching-free estimation.

The package has three layers: geometrical-optics channel synthesis
(`geometry`, `channel`, `scenario`), compressed observation (`sketch`), and
estimation plus analysis (`estimator`, `similarity`, `harness`).
"""

from .channel import (C0, OFDMConfig, awc_steering, index_offsets, nmse,
                      spatial_phase, swc_q_bar, swc_steering, synth_channel,
                      unvec, vec, wideband_path)
from .errors import MacawError
from .estimator import (CurvatureEstimate, EstimatorConfig, PathSeparation,
                        SpectralBox, estimate, estimate_curvature,
                        estimate_direction, recover_path_response,
                        refine_stage1, refine_stage2, relax_separate)
from .geometry import (EffectivePathParams, PathGeometry, SurfacePatch,
                       UPAConfig, WavefrontState, effective_params,
                       make_tangent_basis, propagate_wavefront,
                       reflect_direction, reflect_wavefront, trace_path, unit)
from .scenario import (Scenario, ScenarioConfig, experiment_configs,
                       gen_scenario, near_field_reference, table1_defaults)
from .similarity import (AnisotropyReport, SwcFitGrid, best_swc_fit,
                         best_swc_fit_index, bound, disk_integral_oracle,
                         mu_star)
from .sketch import (ObservationSet, SketchOperator, make_srft, observe,
                     with_extra_phases)

__version__ = "0.1.0"

__all__ = [
    "C0", "OFDMConfig", "awc_steering", "index_offsets", "nmse",
    "spatial_phase", "swc_q_bar", "swc_steering", "synth_channel", "unvec",
    "vec", "wideband_path", "MacawError", "CurvatureEstimate",
    "EstimatorConfig", "PathSeparation", "SpectralBox", "estimate",
    "estimate_curvature", "estimate_direction", "recover_path_response",
    "refine_stage1", "refine_stage2", "relax_separate", "EffectivePathParams",
    "PathGeometry", "SurfacePatch", "UPAConfig", "WavefrontState",
    "effective_params", "make_tangent_basis", "propagate_wavefront",
    "reflect_direction", "reflect_wavefront", "trace_path", "unit",
    "Scenario", "ScenarioConfig", "experiment_configs", "gen_scenario",
    "near_field_reference", "table1_defaults", "AnisotropyReport",
    "SwcFitGrid", "best_swc_fit", "best_swc_fit_index", "bound",
    "disk_integral_oracle", "mu_star", "ObservationSet", "SketchOperator",
    "make_srft", "observe", "with_extra_phases", "__version__",
]
