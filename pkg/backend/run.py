"""
ADMM Pruner Entry Point
Run with: python run.py <command> [--config cfg.json] [--in model.ckpt] [--out dir] [--seed N]
"""

import logging
import sys

from app.cli import main
from app.config import get_settings

settings = get_settings()

if __name__ == "__main__":
    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    sys.exit(main())
