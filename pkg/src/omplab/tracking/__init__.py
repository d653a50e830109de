from .artifactmanager import ActiveRunWrapper, ArtifactManager, ManagedArtifact
from .fluent import (GRID_ARTIFACT, SUITE_ARTIFACT, config_params, grid_config_from_params,
                     load_grid_from_run, log_config, managed_artifact, set_tracking_uri, start_run, track_grid,
                     track_suite)

__all__ = [
    "ActiveRunWrapper", "ArtifactManager", "ManagedArtifact",
    "GRID_ARTIFACT", "SUITE_ARTIFACT", "config_params", "grid_config_from_params",
    "load_grid_from_run", "log_config", "managed_artifact", "set_tracking_uri", "start_run", "track_grid",
    "track_suite"]
