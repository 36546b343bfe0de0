#!/usr/bin/env python3
"""
Progressive vs Direct Pruning Comparison
Runs the compare command: python compare_pipelines.py [config.json] [out_dir] [dense.ckpt]
"""

import logging
import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent / "backend"))

from app.cli import main
from app.config import get_settings

settings = get_settings()


def build_argv(argv):
    """Positional arguments -> compare command flags"""
    args = ["compare"]
    for flag, value in zip(("--config", "--out", "--in"), argv):
        args += [flag, value]
    return args


if __name__ == "__main__":
    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    print("=" * 60)
    print(f"{settings.APP_NAME} - progressive vs direct comparison")
    print("=" * 60)
    sys.exit(main(build_argv(sys.argv[1:])))
