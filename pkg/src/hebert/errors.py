"""Exception taxonomy with stable error codes for CLI surfacing."""


class HebertError(Exception):
    """Base error. `code` is stable and machine-parsable; `module` names the origin."""

    code = "E_GENERIC"
    module = "hebert"
    exit_code = 1

    def __init__(self, message):
        super().__init__(message)
        self.message = message

    def cli_line(self):
        return f"error: module={self.module} code={self.code} msg={self.message}"


class UsageError(HebertError):
    code = "E_USAGE"
    module = "cli"
    exit_code = 2


class DataError(HebertError):
    code = "E_DATA"
    module = "dataset-io"
    exit_code = 3


class CryptoError(HebertError):
    code = "E_CRYPTO"
    module = "ckks-core"
    exit_code = 4


class FormMismatchError(CryptoError):
    code = "E_FORM_MISMATCH"
    module = "ring-arith"


class LevelMismatchError(CryptoError):
    code = "E_LEVEL_MISMATCH"


class ScaleMismatchError(CryptoError):
    code = "E_SCALE_MISMATCH"


class MissingRotationKeyError(CryptoError):
    code = "E_MISSING_ROTATION_KEY"


class SerializationError(CryptoError):
    code = "E_SERIALIZATION"


class OutOfLevelsError(CryptoError):
    """Raised when an operation needs a fresh level and none remain."""

    code = "E_OUT_OF_LEVELS"
    exit_code = 5

    def __init__(self, message):
        super().__init__(message + " (remedy: refresh the ciphertext with bootstrap)")


class InsecureDebugError(CryptoError):
    code = "E_INSECURE_DEBUG"
    module = "ckks-bootstrap"


class ApproximationError(HebertError):
    code = "E_APPROX"
    module = "minimax-approx"
