class MRLabError(Exception):
    """Base class for errors raised by mrlab."""


class GeometryError(MRLabError, ValueError):
    pass


class FamilyError(MRLabError, ValueError):
    pass


class InstanceError(MRLabError, ValueError):
    """Invalid instance: bad shapes, unknown indices, failed orthonormality."""


class BoundaryCaseError(MRLabError, ValueError):
    pass
