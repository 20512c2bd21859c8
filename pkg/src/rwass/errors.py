"""Error taxonomy shared by the library and the CLI exit-code mapping."""


class RwassError(Exception):
    """Base class for all library errors."""


class InputError(RwassError):
    """Malformed or missing input data (CLI exit code 2)."""


class ContractError(RwassError):
    """Arguments violate an operation's preconditions (CLI exit code 3)."""


class InvariantError(RwassError):
    """An internal invariant failed; indicates a bug (CLI exit code 4)."""
