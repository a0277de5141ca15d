"""Exception types raised across the package."""


class SurfchiError(Exception):
    """Base class for every error raised by surfchi."""

    code = "error"

    def to_dict(self):
        return {"error": self.code, "type": type(self).__name__, "message": str(self)}


class ParameterError(SurfchiError, ValueError):
    code = "parameter"


class TopologyError(SurfchiError):
    code = "topology"


class DegenerateFaceError(TopologyError):
    code = "degenerate_face"


class DegenerateChartError(SurfchiError):
    code = "degenerate_chart"


class NonMorseError(SurfchiError):
    code = "non_morse"

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class GenericitySearchError(SurfchiError):
    code = "genericity_search"


class GenericityError(SurfchiError):
    code = "genericity"


class AccuracyError(SurfchiError):
    code = "accuracy"

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ConfigurationError(SurfchiError, ValueError):
    code = "configuration"


class EmptyDecompositionError(SurfchiError):
    code = "empty_decomposition"


class ConditioningError(SurfchiError):
    code = "conditioning"

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class ClassificationError(SurfchiError):
    code = "classification"


class ClearanceError(SurfchiError):
    code = "clearance"


class ResolutionError(SurfchiError):
    code = "resolution"
