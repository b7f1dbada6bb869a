"""HTTP model server for the focore decoding engine."""

from .service import create_app
from .toy import ToyMaskedLM

__version__ = "0.1.0"

__all__ = ["ToyMaskedLM", "create_app"]
