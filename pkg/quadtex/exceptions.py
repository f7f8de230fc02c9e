class QuadtexException(Exception):
    pass


class MeshError(QuadtexException, ValueError):
    pass


class NonQuadFace(MeshError):
    pass


class NonManifoldMesh(MeshError):
    pass


class DegenerateGeometry(MeshError):
    pass


class ShapeMismatch(QuadtexException, ValueError):
    pass


class LevelMismatch(ShapeMismatch):
    pass


class BackwardError(QuadtexException, RuntimeError):
    pass


class FormatError(QuadtexException, ValueError):
    pass


class ConfigError(QuadtexException, ValueError):
    pass


class PoseError(QuadtexException, ValueError):
    pass


class EmptyMask(QuadtexException, ValueError):
    pass


class MissingNOC(QuadtexException, ValueError):
    pass


class ExtractorError(QuadtexException, FileNotFoundError):
    pass


class TrainingDiverged(QuadtexException, FloatingPointError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
