"""Two-stage expert/student visual policy training.

The heavy lifting lives in the compiled ``_secant`` extension; this package
re-exports it and adds a small command-line shim.
"""

from ._secant import (
    ConfigError,
    EnvConfig,
    PixelEnv,
    Policy,
    cycle_consistency,
    run_cli,
    scripted_returns,
)

__all__ = [
    "ConfigError",
    "EnvConfig",
    "PixelEnv",
    "Policy",
    "cycle_consistency",
    "main",
    "run_cli",
    "scripted_returns",
]


def main(argv=None):
    """Entry point mirroring the ``secant`` executable."""
    import sys

    args = list(sys.argv[1:] if argv is None else argv)
    return run_cli(args)
