"""fracground CLI — entry point.

Usage:
    python -m fracground benchmark --out outputs/bench
    python -m fracground solve --config run.toml
    python -m fracground sweep-potential --config run.toml --jobs 4

Exit codes: 0 all checks pass, 2 a check failed, 1 configuration or I/O error.
"""

from __future__ import annotations

import logging
import sys
from typing import Optional

import click

from fracground.config import Settings, load_settings

logger = logging.getLogger("fracground")


def configure_logging(settings: Settings, level: Optional[str] = None) -> None:
    logging.basicConfig(
        level=getattr(logging, (level or settings.log_level).upper(), logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        stream=sys.stderr,
    )


def build_cli() -> click.Group:
    """Create the command group and register every command family."""

    @click.group()
    @click.option("--log-level", default=None, help="Overrides LOG_LEVEL (DEBUG, INFO, WARNING).")
    @click.pass_context
    def cli(ctx: click.Context, log_level: Optional[str]) -> None:
        """Fractional NLS ground states by Nehari minimization, with verification suites."""
        settings = load_settings()
        configure_logging(settings, log_level)
        ctx.ensure_object(dict)
        ctx.obj["settings"] = settings

    # --- Register Commands ---
    from fracground.commands.benchmark import register_benchmark_commands
    from fracground.commands.evolve import register_evolve_commands
    from fracground.commands.solve import register_solve_commands
    from fracground.commands.sweeps import register_sweep_commands
    from fracground.commands.verify import register_verify_commands

    register_solve_commands(cli)
    register_sweep_commands(cli)
    register_verify_commands(cli)
    register_evolve_commands(cli)
    register_benchmark_commands(cli)
    return cli


main = build_cli()


if __name__ == "__main__":
    main()
