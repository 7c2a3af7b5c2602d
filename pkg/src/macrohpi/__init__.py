"""Macro-factor house-price modelling: data pipeline, learners, diagnostics,
scenario grids and econometric baselines."""

from __future__ import annotations

from .dataset import (
    BUILTIN_SPECS, CountryDataset, FeatureSpec, Form, Indicator, ModelSpec, Quarter,
    QuarterlySeries, TargetForm, assemble_dataset, from_arrays, get_spec,
)
from .errors import ConfigError, DataError, MacroHPIError, NumericalError, RankDeficiencyError
from .metrics import FitStatistics, aggregate, lewis_category, run_metrics

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_SPECS", "ConfigError", "CountryDataset", "DataError", "FeatureSpec", "FitStatistics",
    "Form", "Indicator", "MacroHPIError", "ModelSpec", "NumericalError", "Quarter",
    "QuarterlySeries", "RankDeficiencyError", "TargetForm", "aggregate", "assemble_dataset",
    "from_arrays", "get_spec", "lewis_category", "run_metrics",
]
