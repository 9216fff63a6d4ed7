"""ratex exception hierarchy."""

from __future__ import annotations


class RatexError(Exception):
    """Base exception for all ratex errors."""


class ConfigurationError(RatexError):
    """Invalid ratex configuration."""


class ImageError(RatexError):
    """Raw image could not be read, written or is unusable."""


# ---------------------------------------------------------------------------
# Codestream
# ---------------------------------------------------------------------------


class CodestreamError(RatexError):
    """Base for JPEG codestream failures."""


class UnsupportedFormatError(CodestreamError):
    """Valid JPEG, but outside the baseline 4:2:0 subset ratex handles."""


class MalformedStreamError(CodestreamError):
    """Truncated, inconsistent or undecodable JPEG / MCU data."""


class DcOverflowError(MalformedStreamError):
    """Accumulated DC differences leave the 12-bit coefficient range.

    Parameters
    ----------
    value:
        The out-of-range DC coefficient.
    """

    def __init__(self, message: str, value: int) -> None:
        super().__init__(message)
        self.value = value


class InvalidHuffmanSpecError(CodestreamError):
    """Huffman code-length counts violate the Kraft inequality."""


# ---------------------------------------------------------------------------
# Transcoding and container
# ---------------------------------------------------------------------------


class TranscodeError(RatexError):
    """Base for random-access transcoding failures."""


class GroupSpanOverflowError(TranscodeError):
    """A 9-MCU index group spans more bytes than 16-bit offsets address."""


class DcRangeError(TranscodeError):
    """A quantized DC value does not fit in 12-bit two's complement."""


class ContainerError(RatexError):
    """Base for ``.ratex`` / ``.ratexm`` container failures."""


class VersionMismatchError(ContainerError):
    """Container was written by an unsupported format version."""


class CorruptContainerError(ContainerError):
    """Checksum mismatch, truncation or structurally invalid container."""


# ---------------------------------------------------------------------------
# Cache and rendering
# ---------------------------------------------------------------------------


class CacheError(RatexError):
    """Base for texture block cache failures."""


class CacheFullError(CacheError):
    """No free pool block is left; raise ``cache_capacity``."""


class InvalidCacheStateError(CacheError):
    """Operation called on an entry in the wrong state."""


class RenderError(RatexError):
    """Base for deferred renderer failures."""


class MissingBlockError(RenderError):
    """Resolve found a marked MCU that is not resident (pipeline bug)."""


class McuDecodeError(RenderError):
    """Decoding a queued MCU failed.

    Parameters
    ----------
    key:
        Packed 32-bit cache key of the MCU that failed.
    """

    def __init__(self, message: str, key: int) -> None:
        super().__init__(message)
        self.key = key


class SceneError(RenderError):
    """Scene manifest, OBJ mesh or camera is invalid."""


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


class MetricError(RatexError):
    """Base for quality-metric and aggregation failures."""


class DimensionMismatchError(MetricError):
    """Compared images differ in shape."""


class EmptyInputError(MetricError):
    """Aggregation over an empty or ragged sample matrix."""
