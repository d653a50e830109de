import dataclasses
import warnings
from contextlib import contextmanager
from typing import Optional

import mlflow

from ..experiments import GridConfig, GridResult, SuiteResult, export_results, read_grid_csv
from .artifactmanager import ActiveRunWrapper, ArtifactManager

GRID_ARTIFACT = "grid.csv"
SUITE_ARTIFACT = "suite.json"

_artifact_manager = None  # type: Optional[ArtifactManager]


def set_tracking_uri(tracking_uri):
    """Sets the tracking URI analogously to `mlflow.set_tracking_uri` but supports special keywords.

    Parameters
    ----------
    tracking_uri: str
        "file"=None, "localhost"="http://localhost:5000"
    """
    mlflow.set_tracking_uri(_tracking_uri(tracking_uri))


def start_run(run_name=None, experiment_name=None, tmp_dir=None, delete_tmp_dir=True):
    """Same as ``mlflow.start_run`` but also attaches an `ArtifactManager` to the run.

    Parameters
    ----------
    run_name: str, optional, default: None
    experiment_name: str, optional, default: None
        Created if it does not exist.
    tmp_dir: str, optional, default: None
        Staging directory for artifacts; a fresh temporary directory by default.
    delete_tmp_dir: bool, optional, default: True

    Returns
    -------
    ActiveRunWrapper

    Examples
    --------
    >>> from omplab import tracking
    >>> with tracking.start_run(experiment_name="grids"):
    >>>     result = run_recovery_grid(config)
    >>>     tracking.track_grid(result)
    """
    global _artifact_manager

    if experiment_name is not None:
        mlflow.set_experiment(experiment_name)
    if mlflow.active_run() is not None:
        warnings.warn("A run is already active; starting a nested run")
    active_run = mlflow.start_run(run_name=run_name, nested=mlflow.active_run() is not None)

    _artifact_manager = ArtifactManager(tmp_dir=tmp_dir, delete_tmp_dir=delete_tmp_dir)
    return ActiveRunWrapper(active_run, _artifact_manager)


@contextmanager
def managed_artifact(file_name, artifact_path=None, src_run_id=None, dst_run_id=None, skip_log=None):
    """See `ArtifactManager.managed_artifact`.

    Outside of `start_run` a throwaway manager is used, which is enough for
    loading artifacts with `skip_log=True`.
    """
    kwargs = dict(artifact_path=artifact_path, src_run_id=src_run_id, dst_run_id=dst_run_id, skip_log=skip_log)
    if _artifact_manager is not None and _artifact_manager.tmp_dir is not None:
        with _artifact_manager.managed_artifact(file_name, **kwargs) as artifact:
            yield artifact
    else:
        with ArtifactManager() as manager, manager.managed_artifact(file_name, **kwargs) as artifact:
            yield artifact


def config_params(config, prefix=""):
    """Flatten a configuration dataclass into mlflow params.

    Sequences become comma-separated strings, nested dataclasses get dotted names.
    """
    params = {}
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        key = prefix + f.name
        if dataclasses.is_dataclass(value):
            params.update(config_params(value, prefix=key + "."))
        elif isinstance(value, (list, tuple)):
            params[key] = ",".join(str(v) for v in value)
        else:
            params[key] = value
    return params


def log_config(config, prefix="", verbose=0):
    """Log a configuration dataclass as params of the active run.

    Returns
    -------
    dict
        The logged params
    """
    params = config_params(config, prefix=prefix)
    if verbose:
        print("omplab: Logging configuration:")
        for k, v in params.items():
            print("  * {}={}".format(k, v))
    mlflow.log_params(params)
    return params


def grid_config_from_params(params) -> GridConfig:
    """Inverse of `config_params` for a `GridConfig`."""
    def ints(s):
        return tuple(int(v) for v in s.split(",")) if s else ()

    try:
        return GridConfig(
            n=int(params["n"]),
            m_values=ints(params["m_values"]),
            k_values=ints(params["k_values"]),
            trials_per_cell=int(params["trials_per_cell"]),
            ensemble=params["ensemble"],
            master_seed=int(params["master_seed"]),
            signal_model=params["signal_model"],
            success_tol=float(params["success_tol"]))
    except KeyError as e:
        raise ValueError(f"Run params do not describe a grid configuration (missing {e})") from e


def track_grid(result: GridResult, verbose=0):
    """Record a grid in the active run: config params, per-cell success rates and the CSV."""
    if result.config is not None:
        log_config(result.config, verbose=verbose)
    mlflow.log_metrics({f"success_rate_m{m}_k{k}": cell.success_rate for (m, k), cell in result.cells.items()})
    with managed_artifact(GRID_ARTIFACT) as artifact:
        export_results(result, artifact.get_path())


def track_suite(result: SuiteResult, verbose=0):
    """Record a claim suite in the active run: config params, counts and the JSON report."""
    log_config(result.config, verbose=verbose)
    mlflow.log_metrics({
        "instances": result.instances,
        "vacuous": result.vacuous,
        "violations": result.violations,
    })
    for claim, report in result.reports.items():
        mlflow.log_metric(f"checked_{claim}", report.instances_checked)
        mlflow.log_metric(f"vacuous_{claim}", result.vacuous_by_claim.get(claim, 0))
    with managed_artifact(SUITE_ARTIFACT) as artifact:
        export_results(result, artifact.get_path())


def load_grid_from_run(run_id) -> GridResult:
    """Read back a grid logged by `track_grid`, configuration included."""
    params = mlflow.tracking.MlflowClient().get_run(run_id).data.params
    config = grid_config_from_params(params) if params else None
    with managed_artifact(GRID_ARTIFACT, src_run_id=run_id, skip_log=True) as artifact:
        return read_grid_csv(artifact.get_path(), config)


def _tracking_uri(tracking_uri):
    """Helper function for URI shorthands.

    Parameters
    ----------
    tracking_uri: str
        "file" will translate to `None`,
        "localhost" to "http://localhost:5000", and
        "localhost-2" to "http://localhost:5002".

    Returns
    -------
    str or None
    """
    if tracking_uri == "file":
        tracking_uri = None
    elif tracking_uri is not None and tracking_uri.startswith("localhost"):
        split = tracking_uri.split("-")
        port = 5000
        if len(split) > 1:
            port += int(split[1])
        tracking_uri = "http://localhost:{}".format(port)
    return tracking_uri
