"""Exception types shared across the toolkit."""


class ParticulError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(ParticulError):
    """Array shapes or lengths do not match the operation's contract."""


class DatasetError(ParticulError):
    """Dataset is empty, mislabeled or otherwise unusable."""


class SelectorError(ParticulError):
    """Gradient selector is neither a logit index nor a detector kernel."""


class DegenerateCalibration(ParticulError):
    """Scores are constant or too few to fit a logistic distribution."""


class CalibrationError(ParticulError):
    """Calibration parameters are invalid (e.g. non-positive scale)."""


class ModeError(ParticulError):
    """Detector bank mode does not match the requested operation."""


class MagnitudeError(ParticulError):
    """Perturbation magnitude lies outside the declared range."""


class DegenerateInput(ParticulError):
    """Rank correlation input is constant or mismatched."""


class ArtifactError(ParticulError):
    """A required pipeline artifact (model, bank, archive) is missing."""


class ConfigError(ParticulError):
    """Run configuration is malformed."""


class ArchiveFormatError(ParticulError):
    """A binary archive violates its format contract.

    ``offset`` is the byte offset of the first violation.
    """

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset
