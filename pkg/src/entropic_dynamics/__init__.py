"""Entropic-dynamics toolkit: max-ent kernels, walker ensembles, (rho, Phi) field
dynamics with a Fisher-information quantum potential, and a Schroedinger
reference solver."""

__version__ = "0.1.0"
