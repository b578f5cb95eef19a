"""Exception types shared across poetrat."""


class PoetratError(Exception):
    """Base class for every error raised by this package."""


# corpus

class MalformedRecord(PoetratError):
    def __init__(self, line_no: int, reason: str, path: str | None = None):
        self.line_no = line_no
        self.reason = reason
        self.path = path
        where = f"{path}:{line_no}" if path else f"line {line_no}"
        super().__init__(f"{where}: {reason}")


class DuplicateId(PoetratError):
    def __init__(self, record_id: str, line_no: int | None = None):
        self.record_id = record_id
        self.line_no = line_no
        suffix = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"duplicate id {record_id!r}{suffix}")


class CorpusIOError(PoetratError):
    pass


# retrieval

class DuplicatePoemText(PoetratError):
    def __init__(self, normalized_text: str):
        self.normalized_text = normalized_text
        super().__init__(f"two knowledge entries normalize to the same text: {normalized_text[:40]!r}")


class NotFound(PoetratError):
    pass


# gateway

class TransportError(PoetratError):
    pass


class TransientTransportError(TransportError):
    """Failure worth retrying (HTTP 429/5xx, dropped connection)."""


class EmptyCompletion(PoetratError):
    pass


# pipeline

class ViewUnavailable(PoetratError):
    pass


class ExemplarCount(PoetratError):
    pass


class UnparseableChoice(PoetratError):
    def __init__(self, raw_reply: str):
        self.raw_reply = raw_reply
        super().__init__(f"no valid choice in reply: {raw_reply[:80]!r}")


# metrics

class UnparseableScore(PoetratError):
    def __init__(self, raw_reply: str):
        self.raw_reply = raw_reply
        super().__init__(f"no score in 1..5 found in reply: {raw_reply[:80]!r}")


class LengthMismatch(PoetratError):
    pass


class EmptyInput(PoetratError):
    pass


class DegenerateInput(PoetratError):
    """Correlation is undefined (zero variance or fewer than two samples)."""


# cli

class ConfigError(PoetratError):
    pass
