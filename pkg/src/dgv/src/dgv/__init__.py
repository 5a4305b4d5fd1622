"""DG Verification - run the DG kinetic solver cases and write accuracy tables."""

__version__ = "0.2.0"
