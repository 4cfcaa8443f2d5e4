"""Core functionality package for the reconfiguration engine."""
