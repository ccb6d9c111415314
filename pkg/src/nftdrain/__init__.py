"""Detection of NFT drainer accounts from transfer records.

Modules: ``txdata`` (ingest and classification), ``synth`` (synthetic
ecosystem), ``measure`` (behaviour statistics), ``features`` and
``graphs`` (model inputs), ``nn`` and ``extractors`` (graph encoders),
``model`` (fusion and SVM), ``evasion`` (attacks and defense) and
``harness`` (datasets, metrics and experiments).
"""
from nftdrain.kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
