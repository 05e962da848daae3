"""LDPC decoding over two-state Markov bit-flipping channels."""

from .channel import B, G, ChannelParams, average_inversion_probability, derive_seed, sample_noise, stationary_distribution
from .codes import CodeSpec, ParityCheckMatrix, build_encoder, generate_parity_matrix, load_alist, save_alist
from .sumproduct import TannerGraph, channel_llrs, decode_sp

__all__ = [
    "B",
    "G",
    "ChannelParams",
    "CodeSpec",
    "ParityCheckMatrix",
    "TannerGraph",
    "average_inversion_probability",
    "build_encoder",
    "channel_llrs",
    "decode_sp",
    "derive_seed",
    "generate_parity_matrix",
    "load_alist",
    "sample_noise",
    "save_alist",
    "stationary_distribution",
]

__version__ = "0.1.0"
