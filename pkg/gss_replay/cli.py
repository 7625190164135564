"""
Main CLI entry point for gss-replay.
"""

import click
from dotenv import load_dotenv

load_dotenv()

from gss_replay.geometry.cli import angle, correlate
from gss_replay.harness.cli import buffer_dump, sweep, train
from gss_replay.log import configure_logging
from gss_replay.streams.cli import export_dataset_command, fetch_mnist_command


@click.group()
@click.version_option(package_name="gss-replay")
@click.option("--json-logs/--human-logs", default=None, help="Log format (default: $GSS_JSON_LOGS)")
@click.option("--log-level", default=None, help="Minimum log level (default: $GSS_LOG_LEVEL or INFO)")
def cli(json_logs, log_level):
    """Gradient-based sample selection for online continual learning."""
    from gss_replay.config import settings

    json_logs = json_logs if json_logs is not None else settings.JSON_LOGS
    level = (log_level or settings.LOG_LEVEL).upper()
    # import-time defaults already apply otherwise
    if json_logs is not None or level != "INFO":
        configure_logging(json_logs=json_logs, level=level)


cli.add_command(train)
cli.add_command(sweep)
cli.add_command(buffer_dump)
cli.add_command(correlate)
cli.add_command(angle)
cli.add_command(fetch_mnist_command)
cli.add_command(export_dataset_command)

if __name__ == "__main__":
    cli()
