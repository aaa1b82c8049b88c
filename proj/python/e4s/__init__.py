"""Reference-aligned evaluation of persona-grounded conversation simulators."""

import json as _json
import os as _os

from ._core import *  # noqa: F401,F403
from ._core import __version__, run_pipeline as _run_pipeline


def run(config, base_dir=None, write=True):
    """Run the pipeline from a config dict (or a path to a JSON config) and
    return the report as a dict."""
    if isinstance(config, (str, _os.PathLike)):
        path = _os.fspath(config)
        with open(path, encoding="utf-8") as f:
            config = _json.load(f)
        if base_dir is None:
            base_dir = _os.path.dirname(_os.path.abspath(path))
    return _json.loads(_run_pipeline(_json.dumps(config), base_dir or "", write))
