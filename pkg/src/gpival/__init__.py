"""Validation of multi-variable measurement systems with kriging models.

Three steps: build a model of the measurement deviation from a Latin
hypercube sample, confirm it on independent test data, then search the
configuration space for settings likely to exceed the permissible error.
"""
__version__ = "0.1.0"
