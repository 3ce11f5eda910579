"""Joint Chinese word segmentation, POS tagging and NER with a Bi-GRU-CRF."""

from .model import Model
from .tagset import DEFAULT_TAGS, LabelSpace, build_label_space, default_label_space

__all__ = ["Model", "DEFAULT_TAGS", "LabelSpace", "build_label_space", "default_label_space"]
__version__ = "0.1.0"
