from .blobs import BlobFit, blob_fit
from .lsq import FitResult, Trace, curve_fit, least_squares
from .models import (
    CkpModel,
    ckp_curve,
    ckp_joint_fit,
    decay_fit,
    exp_decay,
    gamma_m_fit,
    lorentzian,
    lorentzian_peak,
    ramsey_curve,
    ramsey_fit,
)

__all__ = [
    "BlobFit",
    "CkpModel",
    "FitResult",
    "Trace",
    "blob_fit",
    "ckp_curve",
    "ckp_joint_fit",
    "curve_fit",
    "decay_fit",
    "exp_decay",
    "gamma_m_fit",
    "least_squares",
    "lorentzian",
    "lorentzian_peak",
    "ramsey_curve",
    "ramsey_fit",
]
