"""Exception types shared across the toolkit."""


class SceneFactorError(Exception):
    """Base class for all scenefactor errors."""


class ShapeMismatch(SceneFactorError):
    pass


class RetriesExhausted(SceneFactorError):
    pass


class NotADataset(SceneFactorError):
    pass


class FormatVersionMismatch(SceneFactorError):
    pass


class InvalidConfig(SceneFactorError):
    pass


class EmptyBatch(SceneFactorError):
    pass


class NonFiniteLoss(SceneFactorError):
    pass


class MissingGroundTruth(SceneFactorError):
    pass


class MissingBackgroundRender(SceneFactorError):
    pass


class AssetsUnavailable(SceneFactorError):
    pass


class EmptyRegion(SceneFactorError):
    pass


class EmptyInput(SceneFactorError):
    pass


class InsufficientPairs(SceneFactorError):
    pass


class RankDeficient(SceneFactorError):
    pass


class SingularBlock(SceneFactorError):
    pass


class CheckpointError(SceneFactorError):
    pass
