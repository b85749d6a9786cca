"""Multi-photon magnetic resonance of a strongly driven spin-1/2.

Floquet quasienergy numerics, a relaxation-augmented steady-state solver for
swept-field spectra, and the peak/shift/ratio analysis pipeline that tests the
drive-induced shifts of one-, two- and three-photon lines.
"""

from .analytic import (
    analytic_center,
    analytic_shift,
    angular_factor,
    angular_factor_extrema,
    shift_ratio,
    three_photon_amplitude,
)
from .drive import DriveParams, default_gamma
from .errors import ConvergenceError, InsufficientDataError, ResonanceNotFound
from .floquet import (
    FloquetOperator,
    QuasienergyPair,
    ResonanceFix,
    angular_scan,
    build_floquet_matrix,
    locate_resonance,
    quasienergies,
)
from .liouville import DensityState, RelaxationParams, propagate_period, steady_state_signal
from .spectra import (
    Calibration,
    Line,
    PeakEstimate,
    Spectrum,
    apply_calibration,
    baseline_correct,
    calibrate_field_axis,
    calibration_from_peaks,
    extract_peak_center,
    field_grid,
    lorentzian_lines,
    resonance_window,
    synthesize_line_spectrum,
    synthesize_spectrum,
)
from .analysis import (
    AngularFit,
    RatioReport,
    ShiftRecord,
    compute_shifts,
    consistency_average,
    fit_angular_law,
    fit_ratio_through_origin,
)

__version__ = "0.1.0"
