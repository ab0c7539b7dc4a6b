"""hebert: train and run a logistic-regression text classifier on CKKS-encrypted
sentence embeddings, with a metric-DP noising baseline and an inversion probe."""

__version__ = "0.1.0"
