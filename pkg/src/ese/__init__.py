"""Entropically secure encryption for bulk data.

Short keys are expanded to message-length pads by multiplying with a public
random string in GF(2^n); how short a key may be follows from a compression
based estimate of the plaintext's entropy.
"""

from .bitpoly import BitPolynomial, add, mul_base, poly_from_bytes, poly_to_bytes, shift_left
from .container import (
    CiphertextContainer,
    EncryptConfig,
    decrypt_file,
    decrypt_stream,
    encrypt_file,
    encrypt_stream,
)
from .core import (
    ChunkPlan,
    EseParams,
    encrypt_chunk,
    expand_key,
    generate_public_string,
    key_consumption_rate,
    key_length,
    plan_chunks,
)
from .entropy import EntropyReport, estimate_entropy_corpus, recommend_key_params
from .modred import (
    SparseIrreducible,
    field_modulus,
    find_irreducible,
    is_irreducible,
    reduce,
    reduce_parallel,
)
from .unbalanced import simplemult, simplemult_parallel

__version__ = "0.1.0"

__all__ = [
    "BitPolynomial", "add", "mul_base", "poly_from_bytes", "poly_to_bytes", "shift_left",
    "simplemult", "simplemult_parallel",
    "SparseIrreducible", "find_irreducible", "is_irreducible", "field_modulus",
    "reduce", "reduce_parallel",
    "EseParams", "ChunkPlan", "key_length", "expand_key", "encrypt_chunk", "plan_chunks",
    "generate_public_string", "key_consumption_rate",
    "CiphertextContainer", "EncryptConfig", "encrypt_file", "decrypt_file",
    "encrypt_stream", "decrypt_stream",
    "EntropyReport", "estimate_entropy_corpus", "recommend_key_params",
]
