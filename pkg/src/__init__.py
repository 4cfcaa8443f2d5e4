"""Grid reconfiguration learning-to-optimize engine."""
