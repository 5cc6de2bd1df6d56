"""Change-point tests for nonparametric time-series regression.

The package tests whether the conditional mean of a (possibly
autoregressive) time series is stable over time.  It combines the
classic residual CUSUM with covariate-threshold marks, which keeps
power against breaks that leave the average residual level unchanged.

Main entry points:

* :func:`markedcusum.regression.nw_fit` / :func:`cv_bandwidth` -- kernel fit
* :func:`markedcusum.process.build_grid` -- the marked partial-sum lattice
* :func:`markedcusum.statistics.compute_statistic` -- test statistics
* :func:`markedcusum.bootstrap.run_bootstrap` -- wild-bootstrap test
* :func:`markedcusum.limits.build_critical_tables` -- asymptotic quantiles
* :func:`markedcusum.experiments.run_experiment` -- Monte Carlo harness
* :func:`markedcusum.analysis.analyze` -- file-based end-to-end run
"""

__version__ = "0.1.0"

from .errors import (ContractError, DegenerateNormalizerError, IngestError,
                     InvalidInputError, MarkedCusumError,
                     NoValidBandwidthError, TooFewObservationsError)
from .kernels import KernelSpec, get_kernel, kernel_moment
from .regression import (FitState, Sample, WeightWindow, c_hat, cv_bandwidth,
                         default_bandwidth_grid, nw_fit, nw_predict,
                         variance_at_points, variance_estimate)
from .process import ProcessGrid, brute_force_grid, build_grid, sup_abs
from .statistics import (ChangePointEstimate, StatisticValue,
                         compute_statistic, estimate_changepoint, normalize)
from .limits import (CriticalTable, KieferGrid, asymptotic_decision,
                     build_critical_table, build_critical_tables,
                     default_tables, functional_of_path, load_tables,
                     save_tables, simulate_kiefer_path)
from .bootstrap import (BootstrapRun, MultiplierSpec, bootstrap_sample,
                        bootstrap_statistic, run_bootstrap,
                        run_bootstrap_multi)
from .models import MODEL_IDS, ModelSpec, generate
from .experiments import (ExperimentConfig, ExperimentResult, results_to_csv,
                          run_experiment)
from .analysis import AnalysisConfig, TestReport, analyze, emit_trace, ingest
