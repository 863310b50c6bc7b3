import logging

from . import tasks
from .errors import ConfigError


def dispatch_task(command: str, args: dict):
    """
    Executes the task function registered for a CLI subcommand.
    """
    logging.info(f"Dispatching task: {command} with args: {args}")

    tool_map = {
        "state": tasks.run_state,
        "sweep": tasks.run_sweep,
        "figures": tasks.run_figures,
        "mc": tasks.run_mc,
    }

    func = tool_map.get(command)
    if not func:
        raise ConfigError(f"Command '{command}' not implemented.")

    return func(**args)
