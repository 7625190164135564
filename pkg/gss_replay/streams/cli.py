"""
CLI commands for dataset management.
"""
from typing import Optional

import click

from ..log import get_logger

from .datasets import export_dataset, load_dataset
from .fetch import fetch_mnist


@click.command("fetch-mnist")
@click.option(
    "--dest",
    type=click.Path(file_okay=False),
    default=None,
    help="Target directory (default: $GSS_DATA_DIRECTORY/mnist)",
)
@click.option("--base-url", default=None, help="Mirror serving the *-ubyte.gz files")
@click.option("--force", is_flag=True, help="Download again even if files exist")
def fetch_mnist_command(dest: Optional[str], base_url: Optional[str], force: bool):
    """Download the MNIST IDX files for the full-size benchmarks."""
    log = get_logger(__name__)
    try:
        path = fetch_mnist(dest, base_url, force)
        click.echo(f"MNIST files in {path}")
    except Exception as e:
        log.opt(exception=True).error("fetch-mnist failed", error=str(e))
        raise


@click.command("export-dataset")
@click.argument("source")
@click.argument("output", type=click.Path(dir_okay=False))
def export_dataset_command(source: str, output: str):
    """Write SOURCE (digits, mnist, a CSV or IDX directory) as OUTPUT and OUTPUT's .test.csv."""
    train_path, test_path = export_dataset(load_dataset(source), output)
    click.echo(f"Wrote {train_path} and {test_path}")
