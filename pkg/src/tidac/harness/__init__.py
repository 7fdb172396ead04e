"""Scenario files, deterministic parameter draws and end-to-end runs."""
