"""Open two-qubit quantum battery: charging, storage and local work extraction."""

__version__ = "0.1.0"
