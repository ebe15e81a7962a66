"""Phonotactic language identification over phone sequences."""

from ._phonolid import (
    LabeledCorpus,
    ModelBank,
    NgramModel,
    PhoneAlphabet,
    PhonolidError,
    RnnLm,
    Utterance,
    classify,
    fuse_scores,
    generate_synthetic,
    load_bank,
    load_corpus,
    load_ngram,
    load_rnnlm,
    run_cli,
    summarize,
    train_ngram,
    train_rnnlm,
    write_corpus,
)

__all__ = [
    "LabeledCorpus",
    "ModelBank",
    "NgramModel",
    "PhoneAlphabet",
    "PhonolidError",
    "RnnLm",
    "Utterance",
    "classify",
    "fuse_scores",
    "generate_synthetic",
    "load_bank",
    "load_corpus",
    "load_ngram",
    "load_rnnlm",
    "run_cli",
    "summarize",
    "train_ngram",
    "train_rnnlm",
    "write_corpus",
]
