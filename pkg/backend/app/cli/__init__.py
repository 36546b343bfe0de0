# Command-line surface and experiment harness
from .commands import main, build_parser
