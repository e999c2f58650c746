from ._gs4d import *  # noqa: F401,F403
