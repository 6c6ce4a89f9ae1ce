"""Exception hierarchy shared by all sego modules."""


class SegoError(Exception):
    pass


class InvalidInputError(SegoError, ValueError):
    pass


class DegenerateTriangulationError(SegoError):
    """Back-projected rays or planes are (numerically) parallel."""


class CheiralityError(SegoError):
    """A point lies on or behind the image plane of the camera it is projected into."""


class DegenerateInstanceError(SegoError):
    """The minimal configuration does not determine a finite set of poses."""


class NumericFailureError(SegoError):
    pass


class EstimationFailedError(SegoError):
    pass


class InfeasibleConfigurationError(SegoError):
    pass
