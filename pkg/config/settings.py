import os
from dotenv import load_dotenv

load_dotenv()

APP_NAME = 'qmetric-filtrations'
APP_VERSION = '0.3.0'

# Cache & Report Settings
CACHE_DIR = os.getenv('QMETRIC_CACHE_DIR', 'data/cache/spheres')
REPORT_DIR = os.getenv('QMETRIC_REPORT_DIR', 'data/reports')
SPHERE_CACHE_ENABLED = os.getenv('SPHERE_CACHE_ENABLED', 'true').lower() == 'true'

# Resource budgets (vượt quá -> ResourceBudgetError, không bao giờ cắt bớt im lặng)
SPHERE_BUDGET = int(os.getenv('SPHERE_BUDGET', 250000))
DELTA_EXHAUSTIVE_BUDGET = float(os.getenv('DELTA_EXHAUSTIVE_BUDGET', 2e8))
FREE_WORD_BUDGET = int(os.getenv('FREE_WORD_BUDGET', 20000))
COMPONENT_DIM_BUDGET = int(os.getenv('COMPONENT_DIM_BUDGET', 12))

# Reproducibility
DEFAULT_SEED = int(os.getenv('DEFAULT_SEED', 20240607))

# Operator norm estimation
OP_NORM_TOL = float(os.getenv('OP_NORM_TOL', 1e-10))
OP_NORM_MAX_ITER = int(os.getenv('OP_NORM_MAX_ITER', 5000))

# Haagerup-type constant search
HAAGERUP_STARTS = int(os.getenv('HAAGERUP_STARTS', 20))
HAAGERUP_ITERS = int(os.getenv('HAAGERUP_ITERS', 40))
HAAGERUP_TRIALS = int(os.getenv('HAAGERUP_TRIALS', 200))
RATIO_SLACK = float(os.getenv('RATIO_SLACK', 1e-8))

# Growth statistics
GROWTH_RESIDUAL_TOL = float(os.getenv('GROWTH_RESIDUAL_TOL', 0.05))
OBSTRUCTION_FACTOR = float(os.getenv('OBSTRUCTION_FACTOR', 1.2))

# Connes metric optimization
METRIC_TOL = float(os.getenv('METRIC_TOL', 1e-6))
METRIC_STARTS = int(os.getenv('METRIC_STARTS', 20))
METRIC_MAX_ITER = int(os.getenv('METRIC_MAX_ITER', 400))

# Report format
SCHEMA_VERSION = 1
WRITE_PARQUET = os.getenv('WRITE_PARQUET', 'false').lower() == 'true'
SHOW_PROGRESS = os.getenv('SHOW_PROGRESS', 'true').lower() == 'true'

# Logging Settings
LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
LOG_FILE = os.getenv('LOG_FILE', 'data/logs/qmetric.log')

# Model shorthands accepted on the command line
MODEL_ALIASES = {
    'free2': 'free(2)',
    'free3': 'free(3)',
    'z1': 'zd(1)',
    'z2': 'zd(2)',
    'z3': 'zd(3)',
    'z4': 'zd(4)',
    'dihedral': 'dihedral-infinity',
    'heis': 'heisenberg',
}
