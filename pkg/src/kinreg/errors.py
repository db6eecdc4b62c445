"""Exception hierarchy. Each class carries a short machine-readable code."""


class KinregError(Exception):
    code = "E_KINREG"


class InputValidationError(KinregError, ValueError):
    code = "E_INPUT"


class DomainError(KinregError, ValueError):
    code = "E_DOMAIN"


class RangeError(KinregError, ValueError):
    code = "E_RANGE"


class ShapeError(KinregError, ValueError):
    code = "E_SHAPE"


class ConfigError(KinregError, ValueError):
    """Carries every validation issue as ``(key_path, message)`` pairs."""

    code = "E_CONFIG"

    def __init__(self, issues):
        if isinstance(issues, str):
            issues = [("", issues)]
        self.issues = list(issues)
        super().__init__("; ".join(f"{k}: {m}" if k else m for k, m in self.issues))


class CFLError(KinregError, RuntimeError):
    code = "E_CFL"


class InsufficientResolution(KinregError, RuntimeError):
    code = "E_RESOLUTION"
