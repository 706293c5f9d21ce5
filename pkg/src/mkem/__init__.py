"""Key encapsulation from a masked repetition code with a memory error channel."""

from .kem import (PRESETS, Ciphertext, ParamError, ParamSet, PrivateKey, PublicKey, SharedKey,
                  decapsulate, deserialize, encapsulate, keygen, serialize)

__all__ = ["PRESETS", "Ciphertext", "ParamError", "ParamSet", "PrivateKey", "PublicKey",
           "SharedKey", "decapsulate", "deserialize", "encapsulate", "keygen", "serialize"]
__version__ = "0.1.0"
