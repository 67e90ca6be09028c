"""CLI commands. Each module registers one sub-command whose handler turns a JobSpec into a Report."""

from app.commands import cech, cohomology, glue, milnor, report, verify

COMMAND_MODULES = (verify, cohomology, cech, milnor, glue, report)


def register_all(subparsers) -> None:
    for module in COMMAND_MODULES:
        module.register(subparsers)
