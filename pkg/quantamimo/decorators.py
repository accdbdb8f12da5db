from functools import wraps

from quantamimo.exceptions import DuplicateSubcommand

# NOTE:
# Handlers register themselves when quantamimo.cli is imported; the name given to
# @subcommand is what users type after `quantamimo`.
#
# i.e:
#
# @subcommand("sweep-snr")
# def sweep_snr(parsed, args)
#   ...

SUBCOMMANDS = {}


def subcommand(*args, name=None, plot=True):
    """
    Register a CLI subcommand handler.
    :param args: optional arguments. Either the handler itself or the subcommand name
    :param name: the subcommand name, defaulting to the function name with dashes
    :param plot: whether the subcommand renders SVG output unless --no-plot is given
    :return: wrapped function
    """
    if args and isinstance(args[0], str):
        name, args = args[0], args[1:]

    def _subcommand(handler):
        command = name or handler.__name__.replace("_", "-")
        if command in SUBCOMMANDS:
            raise DuplicateSubcommand(
                command, SUBCOMMANDS[command].__name__, handler.__name__
            )

        @wraps(handler)
        def wrapped_handler(*args, **kwargs):
            return handler(*args, **kwargs)

        wrapped_handler.subcommand = command
        wrapped_handler.subcommand_plot = plot
        SUBCOMMANDS[command] = wrapped_handler
        return wrapped_handler

    # called bare as @subcommand: the first argument is the handler
    if len(args) > 0 and callable(args[0]):
        return _subcommand(args[0])

    return _subcommand
