class SedaSimError(Exception):
    pass


# cipher_core
class SegmentCountExceedsSchedule(SedaSimError):
    pass


class PadSizeMismatch(SedaSimError):
    pass


class VersionOverflow(SedaSimError):
    pass


# integrity
class FoldAfterSeal(SedaSimError):
    pass


class VerifyBeforeComplete(SedaSimError):
    pass


# adversary
class DegenerateLayer(SedaSimError):
    pass


# workload
class LayerTooLargeForSram(SedaSimError):
    pass


class ParseError(SedaSimError):
    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class NonMonotonicCycle(SedaSimError):
    pass


# schemes
class UnalignedDataEvent(SedaSimError):
    pass


class AddressOutOfRange(SedaSimError):
    pass


class MissingLayerContext(SedaSimError):
    pass


# memsim
class MismatchedWorkload(SedaSimError):
    pass


# harness
class ConfigError(SedaSimError):
    pass


class StageError(SedaSimError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")

    def __reduce__(self):
        return StageError, (self.stage, self.cause)


class InvariantViolation(SedaSimError):
    pass
