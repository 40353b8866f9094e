"""Python bindings for the ctxprobe C++ core."""

from ._core import (
    Error,
    FormatError,
    InvalidArgument,
    QueryTooLong,
    TfidfIndex,
    ValidationError,
    answer_in_context,
    assemble,
    binomial_half_cdf,
    mock_nsp,
    precision_at_1,
    run,
    score,
    sign_test,
    split_sentences,
    tokenize,
    weighted_average,
    write_synthetic_probe,
)

__all__ = [
    "Error",
    "FormatError",
    "InvalidArgument",
    "QueryTooLong",
    "TfidfIndex",
    "ValidationError",
    "answer_in_context",
    "assemble",
    "binomial_half_cdf",
    "mock_nsp",
    "precision_at_1",
    "run",
    "score",
    "sign_test",
    "split_sentences",
    "tokenize",
    "weighted_average",
    "write_synthetic_probe",
]
