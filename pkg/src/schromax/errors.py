"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """An input violates an operation's precondition."""


class CapacityError(RuntimeError):
    """A request exceeds a deliberate size guard."""


class GridFormatError(ValueError):
    """A frequency-lattice file could not be parsed."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
