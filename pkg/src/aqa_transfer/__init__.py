"""Score regression for judged actions: an LSTM head over precomputed
clip features, with pooled-training, zero-shot and fine-tuning protocols
and a synthetic benchmark for verifying transfer behavior."""

__version__ = "0.1.0"
