"""Exception types shared across the toolkit.

Every error raised by isoforge derives from IsoforgeError so callers can
catch one base class at the CLI boundary.
"""


class IsoforgeError(Exception):
    """Base class for all isoforge errors."""


# corpus ingestion

class LineCountMismatch(IsoforgeError):
    def __init__(self, src_lines: int, tgt_lines: int):
        super().__init__(
            f"source has {src_lines} lines but target has {tgt_lines}")
        self.src_lines = src_lines
        self.tgt_lines = tgt_lines


class EmptySource(IsoforgeError):
    def __init__(self, line_no: int):
        super().__init__(f"source line {line_no} is empty after stripping")
        self.line_no = line_no


class EmptyTarget(IsoforgeError):
    def __init__(self, line_no: int):
        super().__init__(f"target line {line_no} is empty after stripping")
        self.line_no = line_no


class InvalidEncoding(IsoforgeError):
    def __init__(self, path: str, detail: str):
        super().__init__(f"{path} is not valid UTF-8: {detail}")
        self.path = path


class EmptyDataset(IsoforgeError):
    pass


# demonstration pools

class EmptyPool(IsoforgeError):
    pass


class PoolTooSmall(IsoforgeError):
    def __init__(self, k: int, size: int):
        super().__init__(f"requested {k} shots from a pool of {size}")
        self.k = k
        self.size = size


# prompt rendering

class ShotCountMismatch(IsoforgeError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"config declares {expected} shots but {got} "
                         "demonstrations were supplied")
        self.expected = expected
        self.got = got


# generation backend

class BackendUnreachable(IsoforgeError):
    pass


class BackendError(IsoforgeError):
    def __init__(self, status: int, body: str):
        super().__init__(f"backend returned HTTP {status}: {body[:200]}")
        self.status = status
        self.body = body


class Timeout(IsoforgeError):
    pass


# metrics

class LengthMismatch(IsoforgeError):
    def __init__(self, hyp_n: int, ref_n: int):
        super().__init__(
            f"{hyp_n} hypotheses paired with {ref_n} references")
        self.hyp_n = hyp_n
        self.ref_n = ref_n


class EmptySet(IsoforgeError):
    pass


class NoRecords(IsoforgeError):
    pass


# candidate selection / scoring

class ScorerUnavailable(IsoforgeError):
    pass


class ScorerProtocolViolation(IsoforgeError):
    pass


# analysis

class SentenceSetMismatch(IsoforgeError):
    pass


class EmptyFailureSet(IsoforgeError):
    """Every sentence already produced a compliant output under the
    default condition, so the failure-set analysis has nothing to measure.
    Reported by the CLI, not fatal.
    """


# configuration

class ConfigError(IsoforgeError):
    """Configuration problem with field-level diagnostics."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


IoError = OSError
