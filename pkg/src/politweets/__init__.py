"""Toolkit for separating political from non-political parliamentarian tweets.

Pipeline stages: corpus ingestion and normalisation, temporally stratified
sample construction, word embeddings (file loaders plus in-repo C-BoW and
Skip-Gram training), three neural classifiers (CNN, LSTM, FastText-style)
trained with hand-rolled backpropagation and RMSProp, a Macro-F1 evaluation
harness with per-deputy / per-month bias reports, and a biterm topic model
fitted by collapsed Gibbs sampling.
"""

__version__ = "0.1.0"
