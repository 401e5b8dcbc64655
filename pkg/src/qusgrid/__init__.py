"""Grid-based quantitative-ultrasound toolkit.

Synthesizes speckle images with independently controlled scatterer number
density and mean scatterer amplitude, computes envelope-statistics
parametric maps, classifies speckle development against a reference
profile, and exports reproducible QUSD datasets.
"""

from .classify import (
    ClassMap,
    Label,
    ReferenceProfile,
    build_reference_profile,
    reference_classify,
    snr_map,
    summarize_homogeneous,
)
from .errors import (
    BadMagicError,
    ConfigurationError,
    DataFormatError,
    DegenerateDataError,
    DensityError,
    DigestMismatchError,
    InvalidSampleError,
    NumericError,
    QusError,
    TruncatedFileError,
    UnsupportedVersionError,
    WindowTooSmallError,
)
from .estimators import ParametricImageEstimator, ReferencePhantomClassifier, as_envelope_frame
from .grid import GridSpec, substream
from .phantom import (
    FDS_DENSITY_RANGE,
    MU_S_RANGE,
    SIGMA_S_FIXED,
    UDS_DENSITY_RANGE,
    RegionAssignment,
    RegionMasks,
    ScattererMap,
    ShapeConfig,
    density_to_bernoulli_p,
    generate_region_masks,
    resolution_cell_pixels,
    sample_scatterer_map,
)
from .qusd import (
    GenerateConfig,
    Manifest,
    SampleRecord,
    generate_dataset,
    iter_split,
    load_manifest,
    read_sample,
    synthesize_record,
    synthesize_sample,
    write_sample,
)
from .simulator import (
    BmodeFrame,
    EnvelopeFrame,
    ImagingParams,
    Psf,
    RfFrame,
    build_psf,
    detect_envelope,
    grid_for_params,
    log_compress,
    resolution_cell_extent,
    sample_imaging_params,
    simulate_homogeneous,
    simulate_rf,
)
from .stats import (
    NakagamiEstimate,
    ParametricImage,
    WindowSpec,
    correlation_cell_size,
    nakagami_logpdf,
    nakagami_ml,
    nakagami_moments,
    parametric_image,
    patch_skewness,
    patch_snr,
)

__version__ = "0.1.0"
