"""Exception types. Everything raised for bad data derives from LfcovError."""


class LfcovError(ValueError):
    """Invalid input data or a violated contract."""


class ManifestError(LfcovError):
    def __init__(self, message: str, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class PolicyMismatchError(LfcovError):
    pass


class UndefinedRelativeGrowthError(LfcovError, ZeroDivisionError):
    pass
