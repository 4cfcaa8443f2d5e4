"""API package for the reconfiguration engine."""
