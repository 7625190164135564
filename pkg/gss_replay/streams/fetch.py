"""Download the MNIST IDX archives into the local data directory."""
from __future__ import annotations

from typing import Optional

import httpx
import tenacity
from upath import UPath

from ..log import get_logger
from .datasets import MNIST_FILES

logger = get_logger(__name__)


@tenacity.retry(
    wait=tenacity.wait_exponential(multiplier=1, min=4, max=30),
    retry=tenacity.retry_if_exception_type(httpx.RequestError),
    stop=tenacity.stop_after_attempt(5),
    reraise=True,
)
def url_download(url: str, destination: UPath) -> None:
    """Stream a URL to a file; a partial file never replaces a finished one."""
    partial = destination.with_name(destination.name + ".part")
    try:
        logger.info("Downloading", url=url, destination=str(destination))
        with partial.open("wb") as handle:
            with httpx.stream("GET", url, timeout=60, follow_redirects=True) as response:
                response.raise_for_status()
                for chunk in response.iter_bytes():
                    handle.write(chunk)
        partial.rename(destination)
    except Exception as e:
        logger.error("Download failed", url=url, error=str(e), error_type=type(e).__name__)
        raise


def fetch_mnist(dest: Optional[str | UPath] = None, base_url: Optional[str] = None, force: bool = False) -> UPath:
    """Fetch the four gzipped MNIST files into ``dest`` (default: <data dir>/mnist).

    Files already present are kept unless ``force`` is set.
    """
    from ..config import settings

    dest = UPath(dest) if dest is not None else settings.data_directory / "mnist"
    base_url = base_url or settings.MNIST_BASE_URL
    dest.mkdir(parents=True, exist_ok=True)
    for stem in MNIST_FILES.values():
        target = dest / f"{stem}.gz"
        if target.exists() and not force:
            logger.debug("Already downloaded", file=str(target))
            continue
        url_download(f"{base_url.rstrip('/')}/{stem}.gz", target)
    return dest
