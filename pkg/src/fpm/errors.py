"""Exception hierarchy shared across the toolkit."""


class FPMError(Exception):
    """Base class for domain errors (CLI exit code 1)."""


class DegenerateInput(FPMError):
    pass


class IllConditioned(FPMError):
    pass


class NoIntersection(FPMError):
    pass


class DegenerateCenters(FPMError):
    pass


class ParallelPlanes(FPMError):
    pass


class InvalidDesign(FPMError):
    pass


class InvalidLinks(FPMError):
    pass


class NonPositiveResult(FPMError):
    pass


class OutOfWorkspace(FPMError):
    pass


class DegenerateFrame(FPMError):
    pass


class DegenerateTarget(FPMError):
    pass


class OutOfDomain(FPMError):
    pass


class ZeroNormal(FPMError):
    pass


class InsufficientSamples(FPMError):
    pass


class ParseError(FPMError):
    def __init__(self, line: int, token: str, msg: str = ""):
        self.line = line
        self.token = token
        super().__init__(f"line {line}: cannot parse {token!r}" + (f" ({msg})" if msg else ""))


class UnsupportedCommand(FPMError):
    def __init__(self, line: int, code: str):
        self.line = line
        self.code = code
        super().__init__(f"line {line}: unsupported command {code}")
