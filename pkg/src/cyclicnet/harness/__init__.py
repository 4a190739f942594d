"""Config parsing, synthetic data, training runs and the command line."""
