# The MIT License (MIT)
# Copyright © 2024 fraudbench contributors

# Permission is hereby granted, free of charge, to any person obtaining a copy of this software and associated
# documentation files (the “Software”), to deal in the Software without restriction, including without limitation
# the rights to use, copy, modify, merge, publish, distribute, sublicense, and/or sell copies of the Software,
# and to permit persons to whom the Software is furnished to do so, subject to the following conditions:

# The above copyright notice and this permission notice shall be included in all copies or substantial portions of
# the Software.

# THE SOFTWARE IS PROVIDED “AS IS”, WITHOUT WARRANTY OF ANY KIND, EXPRESS OR IMPLIED, INCLUDING BUT NOT LIMITED TO
# THE WARRANTIES OF MERCHANTABILITY, FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL
# THE AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER LIABILITY, WHETHER IN AN ACTION
# OF CONTRACT, TORT OR OTHERWISE, ARISING FROM, OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER
# DEALINGS IN THE SOFTWARE.

import contextlib
import logging
import os
import shutil
import tempfile
import time
from pathlib import Path
from typing import Iterator, List, Optional, Union

from fraudbench.errors import StageError
from fraudbench.utils.logging import EVENTS_LEVEL_NUM  # noqa: F401  registers Logger.event

logger = logging.getLogger(__name__)


@contextlib.contextmanager
def pipeline_stage(name: str, completed: Optional[List[str]] = None) -> Iterator[None]:
    """
    Context manager marking one pipeline stage.

    Logs the stage boundaries at EVENT level, wraps any failure raised inside
    the block into a StageError naming the stage, and appends `name` to
    `completed` when the block finishes.

    Args:
        name (str): Stage name as it appears in logs and error messages.
        completed (list): Optional list collecting the stages that ran, in order.

    Example:
        with pipeline_stage("split", stages):
            train, test = stratified_split(ds, 0.2, seed)
    """
    logger.event(f"stage {name} started")
    start = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        logger.event(f"stage {name} failed: {exc}")
        raise StageError(name, exc) from exc
    elapsed = time.perf_counter() - start
    logger.event(f"stage {name} finished in {elapsed:.2f}s")
    if completed is not None:
        completed.append(name)


@contextlib.contextmanager
def staging_directory(target: Union[str, Path]) -> Iterator[Path]:
    """
    Yields a scratch directory next to `target`. On success its files are
    moved into `target` (created if needed, existing files replaced); on any
    failure the scratch directory is deleted and `target` is left untouched.
    """
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=f".{target.name}-", dir=target.parent))
    try:
        yield scratch
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    target.mkdir(parents=True, exist_ok=True)
    for source in sorted(scratch.rglob("*")):
        if source.is_dir():
            continue
        dest = target / source.relative_to(scratch)
        dest.parent.mkdir(parents=True, exist_ok=True)
        os.replace(source, dest)
    shutil.rmtree(scratch, ignore_errors=True)
