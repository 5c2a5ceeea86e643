"""
Configuration module for MVC moment tests
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
env_path = Path(__file__).parent / '.env'
load_dotenv(env_path)


def _int_list(value: str):
    return [int(v) for v in value.split(',') if v.strip()]


class Config:
    """Configuration class for test defaults and numerical tolerances"""

    # Test defaults
    DEFAULT_ALPHA = float(os.getenv('MVC_ALPHA', '0.05'))
    DEFAULT_MODIFICATION = os.getenv('MVC_MODIFICATION', 'si')
    MODIFICATIONS = ('ss', 'si', 'ii')

    # Simulation defaults
    DEFAULT_SEED = int(os.getenv('MVC_SEED', '20150204'))
    DEFAULT_WORKERS = int(os.getenv('MVC_WORKERS', '1'))
    DEFAULT_REPLICATIONS = int(os.getenv('MVC_REPLICATIONS', '1000'))
    DEFAULT_SAMPLE_SIZES = _int_list(
        os.getenv('MVC_SAMPLE_SIZES', '50,100,250,500,750,1000,2000,5000')
    )

    # Numerical tolerances
    ROW_SUM_TOLERANCE = 1e-9
    SINGULAR_RCOND = 1e-10
    PD_PIVOT_TOLERANCE = 1e-12
    UNBIASEDNESS_TOLERANCE = 1e-9
    MASS_TOLERANCE = 1e-12

    # Logging
    LOG_LEVEL = os.getenv('MVC_LOG_LEVEL', 'INFO')
    LOG_DIR = Path(os.getenv('MVC_LOG_DIR', str(Path(__file__).parent / 'logs')))

    @classmethod
    def validate(cls):
        """Validate that configuration values are usable"""
        errors = []

        if not 0.0 < cls.DEFAULT_ALPHA < 1.0:
            errors.append(f"MVC_ALPHA must be in (0, 1), got {cls.DEFAULT_ALPHA}")
        if cls.DEFAULT_MODIFICATION not in cls.MODIFICATIONS:
            errors.append(f"MVC_MODIFICATION must be one of {cls.MODIFICATIONS}")
        if cls.DEFAULT_WORKERS < 1:
            errors.append("MVC_WORKERS must be at least 1")
        if cls.DEFAULT_REPLICATIONS < 1:
            errors.append("MVC_REPLICATIONS must be at least 1")
        if not cls.DEFAULT_SAMPLE_SIZES or min(cls.DEFAULT_SAMPLE_SIZES) < 1:
            errors.append("MVC_SAMPLE_SIZES must list positive sample sizes")
        if cls.LOG_LEVEL not in ('DEBUG', 'INFO', 'WARNING', 'ERROR'):
            errors.append(f"MVC_LOG_LEVEL not recognised: {cls.LOG_LEVEL}")

        if errors:
            raise ValueError(f"Configuration errors: {', '.join(errors)}")

        return True
