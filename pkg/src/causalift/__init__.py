"""Causal discovery driven feature selection for lagged time series prediction.

The package is organized around a small set of layers:

- ``dataset``: immutable multivariate series, lagged design matrices, splits, CSV I/O
- ``simulator``: a structural causal model generator with a known ground-truth graph
- ``stats``: correlation and stationarity primitives (partial correlation, ADF)
- ``discovery``: lag-window selection and the PC_1 parent-identification pass
- ``graph``: the lagged graph object, expert edits, serialization
- ``features``: causal and baseline feature selectors over lagged designs
- ``models``: in-repo predictors (OLS, lasso, forest, GBT, MLP) and random-search CV
- ``metrics``: prediction metrics, post-intervention windows, result tables
- ``pipeline``: the end-to-end experiment runner and results bundle
- ``service``/``cli``: HTTP API and command line entry points
"""

from causalift.dataset import (
    InterventionEvent,
    LaggedDesign,
    TimeSeriesDataset,
    Variable,
    build_lagged_design,
    read_csv,
    temporal_split,
    write_csv,
)

__all__ = [
    "InterventionEvent",
    "LaggedDesign",
    "TimeSeriesDataset",
    "Variable",
    "build_lagged_design",
    "read_csv",
    "temporal_split",
    "write_csv",
]

__version__ = "0.1.0"
