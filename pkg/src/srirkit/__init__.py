"""srirkit: spatial room impulse response analysis, parametric binaural
resynthesis, and objective evaluation against an image-source oracle.
"""

from .arrays import FoaSignal, MicArrayGeometry, builtin_array, encode_foa_open_array
from .doa import (
    DoaConfig,
    DoaTrajectory,
    TfDoaField,
    piv_broadband_doa,
    smooth_doa,
    tdoa_ls_doa,
    tf_piv_analysis,
)
from .dsp import (
    cross_correlate,
    detect_onset,
    fft_convolve,
    istft,
    normalize_direct_energy,
    stft,
)
from .filterbanks import FilterbankSpec, erb_filterbank, erb_spec, octave_filter
from .grids import LoudspeakerGrid, fibonacci_grid, load_grid_csv, nearest_direction
from .hrir import HrirSet, load_hrir_set, spherical_head_hrir_set
from .ism import (
    ImageSourceList,
    Scene,
    ShoeboxRoom,
    enumerate_images,
    render_array_srir,
    render_foa_srir,
    render_reference_brir,
)
from .metrics import (
    ErrorSummary,
    MetricReport,
    error_summary,
    iacc,
    iacc_e3_l3,
    ild_avg,
    itd,
    measure_brir,
    t30_mid,
)
from .pipelines import (
    AnalysisInput,
    ComparisonResult,
    ComparisonRun,
    SceneRendering,
    SystemCondition,
    run_comparison,
    run_condition,
    simulate,
)
from .signals import BinauralIr, MonoIr, MultichannelIr, StftFrames
from .sweep import deconvolve_ess, generate_ess
from .synthesis import (
    VirtualLoudspeakerSignals,
    binaural_render,
    decorrelate,
    sdm_synthesize,
    sirr_synthesize,
    sirr_tf_streams,
)
from .vbap import VbapGains, vbap_gains

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
