import os
import shutil
import tempfile
from contextlib import contextmanager

import mlflow


class ManagedArtifact(object):

    def __init__(self, path, loaded, skip_log):
        """

        Parameters
        ----------
        path: str
            Local path of the staged file
        loaded: bool
            Whether the file was downloaded from a previous run
        skip_log: bool
            Whether the file will be logged when the context exits
        """
        self._path = path
        self.loaded = loaded
        self.skip_log = skip_log

    def get_path(self):
        """Local path to read or write the artifact at."""
        return self._path


class ArtifactManager(object):

    def __init__(
            self,
            client: mlflow.tracking.MlflowClient = None,
            tmp_dir=None,
            delete_tmp_dir=True,
            skip_log=False):
        """
        Parameters
        ----------
        client: mlflow.tracking.MlflowClient, optional, default: None
            If `client=None` the client is initialized via `mlflow.tracking.MlflowClient()`.
        tmp_dir: str, optional, default: None
            If `tmp_dir=None`, `ArtifactManager.init` will create a
            temporary directory via `tempfile.mkdtemp(prefix="omplab_")`
        delete_tmp_dir: bool, optional, default: True
            Whether to delete the temporary directory on
            cleanup (see `ArtifactManager.cleanup` or `ArtifactManager.__exit__`).
        skip_log: bool, optional, default: False
            Default for `managed_artifact`; `True` only stages files locally.
        """
        if client is None:
            self.client = mlflow.tracking.MlflowClient()
        else:
            self.client = client

        self.tmp_dir = tmp_dir
        self.delete_tmp_dir = delete_tmp_dir
        self.skip_log = skip_log

    def __enter__(self):
        self.init()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.cleanup()
        return False

    def init(self):
        """Create the staging directory if it does not exist yet."""
        if self.tmp_dir is None:
            self.tmp_dir = tempfile.mkdtemp(prefix="omplab_")
        else:
            os.makedirs(self.tmp_dir, exist_ok=True)

    def cleanup(self):
        """Delete the staging directory if `self.delete_tmp_dir` is set to `True`."""
        if self.delete_tmp_dir and self.tmp_dir is not None:
            shutil.rmtree(self.tmp_dir, ignore_errors=True)
            self.tmp_dir = None

    @staticmethod
    def _get_dst_run_id(dst_run_id=None):
        if dst_run_id is not None:
            return dst_run_id
        active_run = mlflow.active_run()
        if active_run is None:
            raise RuntimeError("No run id given and no active run found")
        return active_run.info.run_id

    @contextmanager
    def managed_artifact(
            self,
            file_name,
            artifact_path=None,
            src_run_id=None,
            dst_run_id=None,
            skip_log=None,
            delete=True) -> ManagedArtifact:
        """Stage a file in the temporary directory and log it when the context exits.

        Parameters
        ----------
        file_name: str
            Name of the file relative to the staging directory and to `artifact_path`.
        artifact_path: str, optional, default: None
            Directory inside the run's artifact root.
        src_run_id: str, optional, default: None
            Download ``artifact_path/file_name`` from this run before yielding;
            ``loaded`` is then `True`.
        dst_run_id: str, optional, default: None
            Run to log to; defaults to the active run.
        skip_log: bool, optional, default: None
            Overrides the manager's `skip_log`.
        delete: bool, optional, default: True
            Remove the staged file afterwards.

        Yields
        -------
        ManagedArtifact
        """
        if self.tmp_dir is None:
            self.init()
        if skip_log is None:
            skip_log = self.skip_log

        tmp_file = os.path.join(self.tmp_dir, file_name)
        dir_name = os.path.dirname(tmp_file)
        os.makedirs(dir_name, exist_ok=True)

        if src_run_id is not None:
            remote = file_name if artifact_path is None else f"{artifact_path}/{file_name}"
            downloaded = mlflow.artifacts.download_artifacts(run_id=src_run_id, artifact_path=remote, dst_path=dir_name)
            if os.path.abspath(downloaded) != os.path.abspath(tmp_file):
                shutil.move(downloaded, tmp_file)

        try:
            yield ManagedArtifact(tmp_file, src_run_id is not None, skip_log)
        finally:
            if not skip_log:
                if not os.path.exists(tmp_file):
                    raise FileNotFoundError(f"Artifact not found (`{file_name}`). Did you forget to create it?")
                run_id = ArtifactManager._get_dst_run_id(dst_run_id=dst_run_id)
                self.client.log_artifact(run_id, tmp_file, artifact_path=artifact_path)
            if delete and os.path.exists(tmp_file):
                os.remove(tmp_file)


class ActiveRunWrapper:
    """Wraps an `mlflow.ActiveRun` so the run's `ArtifactManager` lives exactly as long as the run."""

    def __init__(self, active_run, artifact_manager):
        self.active_run = active_run
        self.artifact_manager = artifact_manager

    @property
    def run_id(self):
        return self.active_run.info.run_id

    def __enter__(self):
        self.active_run.__enter__()
        self.artifact_manager.init()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.artifact_manager.cleanup()
        return self.active_run.__exit__(exc_type, exc_val, exc_tb)
