"""Shared exception types."""


class DimensionGuardError(RuntimeError):
    """A requested construction exceeds its configured combinatorial size cap.

    Raised instead of silently truncating: basis sizes, block dimensions and
    tensor-product spaces all grow combinatorially, and an oversized request
    is treated as a user error, never as something to clip.
    """
