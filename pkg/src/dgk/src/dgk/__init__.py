"""DG Kinetic - discontinuous Galerkin solver with gas-kinetic fluxes on box meshes."""

__version__ = "0.2.0"
