"""Exception hierarchy.

Everything raised on purpose derives from :class:`SampleAlignError`.  The CLI
maps :class:`DataError` to exit code 2 and :class:`TransportError` to exit
code 3.
"""


class SampleAlignError(Exception):
    pass


class DataError(SampleAlignError):
    """Bad input data or an impossible request on valid data."""


class TransportError(SampleAlignError):
    """A collective could not complete."""


# seqcore
class EmptyInputError(DataError):
    pass


class IllegalSymbolError(DataError):
    def __init__(self, seq_id, position, symbol=None):
        self.seq_id = seq_id
        self.position = position
        self.symbol = symbol
        super().__init__(f"illegal symbol {symbol!r} in {seq_id!r} at position {position}")


class RaggedAlignmentError(DataError):
    pass


class DuplicateIdError(DataError):
    def __init__(self, seq_id):
        self.seq_id = seq_id
        super().__init__(f"duplicate sequence id {seq_id!r}")


class UnknownSymbolError(DataError):
    pass


class InvalidRatesError(DataError):
    pass


# kmer
class SequenceTooShortError(DataError):
    def __init__(self, seq_id, length, kmer_len):
        self.seq_id = seq_id
        super().__init__(f"sequence {seq_id!r} has length {length} < k-mer length {kmer_len}")


class EmptyReferenceSetError(DataError):
    pass


class OutOfRangeError(DataError):
    pass


# partition / pipeline
class InsufficientSequencesError(DataError):
    pass


class WrongSampleCardinalityError(DataError):
    pass


# msa
class EmptyProfileError(DataError):
    pass


class EmptyAlignmentError(DataError):
    pass


class AllGapConsensusError(DataError):
    pass


class TemplateWidthMismatchError(DataError):
    pass


class AlignerFailedError(DataError):
    pass


# quality
class IdMismatchError(DataError):
    pass


class SequenceMismatchError(DataError):
    pass


class EmptyReferenceError(DataError):
    pass


class LengthMismatchError(DataError):
    pass


# transport
class PeerDisconnectedError(TransportError):
    pass


class FrameCorruptError(TransportError):
    pass
