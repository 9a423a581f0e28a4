"""Raster RUSLE soil-erosion modelling with exact and ensemble rainfall erosivity."""

from .climatology import (
    DailyPrecipStack,
    IndicatorDef,
    IndicatorRegistry,
    IndicatorTransformer,
    compute_all,
    compute_indicator,
    default_registry,
    fingerprint,
)
from .erosion_model import ErosionMap, classify, compose
from .erosivity_empirical import EmpiricalEquation, EquationSet, Term, default_equations, evaluate, guard
from .erosivity_exact import (
    EventErosivity,
    RainRecord,
    RainSeries,
    Storm,
    annual_erosivity,
    event_energy,
    event_erosivity,
    gauge_r_factor,
    max_30min_intensity,
    r_factor,
    split_events,
)
from .raster import GridSpec, Raster, align, reduce_stack, zip_map
from .rds_ensemble import (
    EnsembleWeights,
    RDSEnsemble,
    aggregate,
    ensemble_r,
    normalize_weights,
    rds,
    trustability,
    weighted_median,
)
from .rusle_factors import (
    CoverTable,
    FactorSet,
    SoilTexture,
    c_factor,
    k_factor,
    l_factor,
    p_factor,
    s_factor,
    slope,
    st_factor,
)

__version__ = "0.1.0"
