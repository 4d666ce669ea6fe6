"""Retinal image simulation for integral-imaging light field displays viewed by aberrated eyes."""

__version__ = "0.1.0"

from .display import DisplayConfig, SubapertureLayout, subaperture_layout
from .eye_model import AccommodationState, EyeInstance, average_eye, load_population, sample_eyes
from .metrics import NcsfParams, cutoff_frequency, radial_mtf, strehl, vsotf
from .optics import RetinalGrid, RetinaSimulator, SimulationOptions, retinal_psf
from .through_focus import experiment_matrix, predict_accommodation, sweep
from .zernike import ZernikeCoefficients, rescale_pupil

__all__ = [
    "DisplayConfig",
    "SubapertureLayout",
    "subaperture_layout",
    "AccommodationState",
    "EyeInstance",
    "average_eye",
    "load_population",
    "sample_eyes",
    "NcsfParams",
    "cutoff_frequency",
    "radial_mtf",
    "strehl",
    "vsotf",
    "RetinalGrid",
    "RetinaSimulator",
    "SimulationOptions",
    "retinal_psf",
    "experiment_matrix",
    "predict_accommodation",
    "sweep",
    "ZernikeCoefficients",
    "rescale_pupil",
]
