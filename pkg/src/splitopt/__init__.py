"""Budget- and SNR-aware configuration search for split-network deep JSCC classifiers."""

__version__ = "0.1.0"
