from .commands import cmd_build, cmd_eval, cmd_invert, cmd_sweep, cmd_validate  # noqa: F401
from .config import ConfigError, ProblemConfig  # noqa: F401
