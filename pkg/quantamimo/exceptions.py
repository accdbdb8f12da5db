from django.core.exceptions import ImproperlyConfigured


class ContractViolation(ValueError):
    """
    Raised when the precondition of an operation is not satisfied by its arguments.
    """

    def __init__(self, msg=None):
        if msg is None:
            msg = "Operation precondition violated."
        super().__init__(msg)


class UnsupportedConstellation(ContractViolation):
    def __init__(self, order=None):
        self.order = order
        super().__init__(
            'Unsupported constellation "{}"; expected one of 4, 16, 64 or '
            "qpsk, 16qam, 64qam.".format(order)
        )


class SingularGram(ArithmeticError):
    """
    Raised when a Gram matrix M^H M cannot be solved reliably.
    """

    def __init__(self, condition=None, msg=None):
        self.condition = condition
        if msg is None:
            msg = "Singular or ill-conditioned Gram matrix (condition {:.3e}).".format(
                float("inf") if condition is None else condition
            )
        super().__init__(msg)


class NonConvergence(ArithmeticError):
    def __init__(self, movement, iterations):
        self.movement = movement
        self.iterations = iterations
        super().__init__(
            "Lloyd-Max iteration did not converge after {} iterations "
            "(last label movement {:.3e}).".format(iterations, movement)
        )


class InvalidConfig(ImproperlyConfigured):
    """
    Raised when an experiment configuration file or mapping fails validation.
    """

    def __init__(self, key, reason, line=None):
        self.key = key
        self.reason = reason
        self.line = line
        where = "" if line is None else " (line {})".format(line)
        super().__init__('Invalid config key "{}"{}: {}'.format(key, where, reason))


class DuplicateSubcommand(ImproperlyConfigured):
    def __init__(self, name, registered=None, handler=None):
        self.name = name
        super().__init__(
            'Subcommand "{}" is registered by both "{}" and "{}".'.format(
                name, registered, handler
            )
        )


class ResultLocked(RuntimeError):
    def __init__(self, msg=None):
        if msg is None:
            msg = "Timed out waiting for the result cache lock."
        super().__init__(msg)
