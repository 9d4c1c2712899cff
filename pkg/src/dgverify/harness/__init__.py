"""Fixture generation, scenario suites, batch replay and reporting."""
