"""Command-line workbench: configuration, experiment runners and result files."""
