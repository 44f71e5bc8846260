"""
Entry point for the plumerise command-line interface.
"""
from plumerise.cli import cli

if __name__ == "__main__":
    cli()
