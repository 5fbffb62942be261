"""
cmu-lab command-line entry point.

Equivalent to the installed `cmu-lab` script:

    python main.py verify
    python main.py sweep --config exp.json --out table.csv
"""

from cmu_lab.cli import run_cli

if __name__ == "__main__":
    run_cli()
