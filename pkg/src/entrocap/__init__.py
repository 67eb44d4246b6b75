"""entrocap: one-shot entropies, degradability and EA private capacity numerics."""

__version__ = "0.1.0"
