"""Emax dose-response estimation for three-point designs."""
__version__ = "0.1.0"
