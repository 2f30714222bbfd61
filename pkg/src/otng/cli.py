"""Command-line driver: otng <fit|geodesic|compare|metric>.

Exit codes: 0 success, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .experiments import ConfigError, run_compare, run_fit, run_geodesic, run_metric

_COMMANDS = {
    "fit": run_fit,
    "geodesic": run_geodesic,
    "compare": run_compare,
    "metric": run_metric,
}


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _dispatch(command: str, config: str, seed, out: str) -> None:
    try:
        cfg = _load_config(config)
        if seed is not None:
            cfg["seed"] = int(seed)
        _COMMANDS[command](cfg, Path(out))
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except Exception as exc:  # noqa: BLE001 - numerical failures exit 3
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(3)


@click.group()
def main():
    """Wasserstein natural gradient experiments."""


def _make_command(name):
    @click.option("--config", required=True, type=click.Path(), help="JSON config file")
    @click.option("--seed", default=None, type=int, help="override config seed")
    @click.option("--out", default=".", type=click.Path(), help="output directory")
    def cmd(config, seed, out):
        _dispatch(name, config, seed, out)

    cmd.__name__ = name
    return main.command(name=name)(cmd)


for _name in _COMMANDS:
    _make_command(_name)


if __name__ == "__main__":
    main()
