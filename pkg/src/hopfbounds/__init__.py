"""Lower bounds and Monte Carlo estimates for the non-minimal part of phase space
in convex billiards and conformally flat tori."""

__version__ = "0.1.0"
