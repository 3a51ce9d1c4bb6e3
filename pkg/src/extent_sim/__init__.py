"""Approximate STT-RAM write simulator with self-terminating, four-level drivers."""

from .device import CellState, MtjParams, WerModel
from .driver import DriverConfig, QualityLevel, TransistorParams
from .engine import SoftErrorEvent, WriteConfig, WriteOutcome, WriteRequest, WriteResult, write_cell, write_word
from .errors import CalibrationError, DomainError, ExtentSimError, ParseError, RegimeError, UsageError

__version__ = "0.1.0"

__all__ = [
    "CellState",
    "MtjParams",
    "WerModel",
    "DriverConfig",
    "QualityLevel",
    "TransistorParams",
    "SoftErrorEvent",
    "WriteConfig",
    "WriteOutcome",
    "WriteRequest",
    "WriteResult",
    "write_cell",
    "write_word",
    "CalibrationError",
    "DomainError",
    "ExtentSimError",
    "ParseError",
    "RegimeError",
    "UsageError",
]
