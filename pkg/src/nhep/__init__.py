"""Nonholonomic Euler-Poincare dynamics in Hamel frames: the pendulum skate,
its rotor-stabilized variant and the Veselova system, with stability tools
and a scenario-driven command line."""

__version__ = "0.1.0"
