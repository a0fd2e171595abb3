"""Exception types shared across the package."""


class ContractError(Exception):
    """A caller violated a documented precondition or invariant."""


class ParseError(ContractError):
    """An input file is malformed; message names the offending line."""
