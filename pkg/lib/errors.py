class QSSError(Exception):
    """Base class for every failure raised by the simulator."""


class ConfigError(QSSError, ValueError):
    """Configuration file or CLI flags describe an impossible experiment."""


class DimensionCapError(ConfigError):
    """Joint state would exceed the amplitude cap."""


class NormCorruptionError(QSSError, ArithmeticError):
    """A state reached measurement with a norm far from 1."""


class InvalidRoundError(QSSError, ValueError):
    """Ledger or key material requested for a round that failed sifting."""


class InsufficientSamplesError(QSSError, ValueError):
    """Too few samples for the requested statistic."""


class AttackError(QSSError):
    """An attack strategy was handed a state it cannot act on."""


class AcceptanceError(QSSError):
    """A selftest or acceptance check failed."""


# Process exit codes for the CLI. Order matters: most specific class first.
EXIT_CODES = (
    (DimensionCapError, 3),
    (ConfigError, 1),
    (AcceptanceError, 2),
)


def exit_code_for(error):
    for cls, code in EXIT_CODES:
        if isinstance(error, cls):
            return code
    return 1
