class ViasnetError(Exception):
    """Base class for all errors raised by the package."""


class InvalidInputError(ViasnetError, ValueError):
    pass


class IngestError(ViasnetError):
    def __init__(self, message, frame_index=None):
        if frame_index is not None:
            message = f"frame {frame_index}: {message}"
        super().__init__(message)
        self.frame_index = frame_index


class AlignmentError(ViasnetError):
    pass


class ConfigurationError(ViasnetError, ValueError):
    pass


class ContractError(ViasnetError, ValueError):
    """A documented shape/state precondition was violated."""


class CaptionServiceError(ViasnetError):
    pass


class ProviderError(ViasnetError):
    pass


class TrainingDivergedError(ViasnetError):
    def __init__(self, message, last_good_checkpoint=None):
        super().__init__(message)
        self.last_good_checkpoint = last_good_checkpoint
