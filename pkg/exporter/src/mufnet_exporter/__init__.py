"""Feature exporter: pretrained encoders in, mufnet feature stores out."""

from .encoders import PretrainedEncoders, RandomInitEncoders, pretrained_available
from .export import ExportError, ExportJob, ExportReport, export
from .listing import ListingError, Pair, load_listing, write_manifest
from .writer import StoreWriteError, write_store

__version__ = "0.1.0"
