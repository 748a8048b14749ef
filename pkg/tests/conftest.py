"""Pytest and Hypothesis configuration for stable CI across platforms."""

from hypothesis import settings

# Quotient enumeration and eigensolves routinely exceed the default 200ms deadline.
settings.register_profile("superapprox", deadline=None)
settings.load_profile("superapprox")
