"""Models package for the reconfiguration engine."""
