"""Services package.

Submodules are imported directly (`cmu_lab.services.engine`, ...); the
container wires the service classes together.
"""
