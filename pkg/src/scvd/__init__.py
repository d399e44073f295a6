"""Smart-contract vulnerability classification: corpus handling, Solidity
preprocessing, recurrent and transformer-encoder classifiers, training and
evaluation reporting."""

__version__ = "0.1.0"
