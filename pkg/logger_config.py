"""
Logging configuration module
"""

import logging
import sys
from pathlib import Path
from datetime import datetime
from typing import Optional

from config import Config


def setup_logging(log_level=logging.INFO, log_file_prefix="mvc_moment_tests",
                  log_to_file: bool = True, log_dir: Optional[Path] = None):
    """
    Set up logging configuration for the application

    Args:
        log_level: Logging level (default: INFO)
        log_file_prefix: Prefix for log file name
        log_to_file: Also write a timestamped log file
        log_dir: Directory for log files (default: Config.LOG_DIR)

    Returns:
        Path to the log file, or None when file logging is off
    """
    # Reports go to stdout, so log records go to stderr
    handlers = [logging.StreamHandler(sys.stderr)]
    log_file = None

    if log_to_file:
        log_dir = Path(log_dir) if log_dir else Config.LOG_DIR
        log_dir.mkdir(parents=True, exist_ok=True)

        # Create log file with timestamp
        timestamp = datetime.now().strftime('%Y%m%d_%H%M%S')
        log_file = log_dir / f"{log_file_prefix}_{timestamp}.log"
        handlers.insert(0, logging.FileHandler(log_file))

    # Configure logging
    logging.basicConfig(
        level=log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True
    )

    return log_file
