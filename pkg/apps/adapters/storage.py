"""Atomic file writes shared by the image and weight adapters.

Payloads are written to a sibling temporary file and moved into place with
os.replace, so a reader never observes a half-written file. Transient
OSErrors (network filesystems, antivirus locks) are retried.
"""

from pathlib import Path
import os
import tempfile

from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from apps.core.observability.logging import get_logger

logger = get_logger(__name__)


@retry(
    retry=retry_if_exception_type(OSError),
    stop=stop_after_attempt(3),
    wait=wait_exponential(multiplier=0.05, max=1.0),
    reraise=True,
)
def atomic_write_bytes(path: Path, payload: bytes) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    logger.debug("file_written", path=str(path), bytes=len(payload))
