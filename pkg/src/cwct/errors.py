class ContractError(ValueError):
    """A caller broke a documented precondition (shape, range, divisibility)."""


class ConfigError(ValueError):
    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class FormatError(ValueError):
    """Malformed binary or text input. Messages carry the byte offset and field."""

    def __init__(self, message, offset=None, field=None):
        self.offset = offset
        self.field = field
        where = []
        if offset is not None:
            where.append(f"offset {offset}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
