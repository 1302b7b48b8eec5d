
import os
from dotenv import load_dotenv
import logging

load_dotenv()

# Logging
logging.basicConfig(
    level=os.getenv("SPARSITY_LOG_LEVEL", "INFO").upper(),
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
)
logger = logging.getLogger("sparsity")

TOOL_VERSION = "0.3.0"
REPORT_SCHEMA = "sparsity-report/1"

# Enumeration caps
KTERM_CAP = int(os.getenv("SPARSITY_KTERM_CAP", "10000000"))
VERTEX_CAP = int(os.getenv("SPARSITY_VERTEX_CAP", "4"))
SUPPORT_CAP = int(os.getenv("SPARSITY_SUPPORT_CAP", "1000000"))
PATTERN_CAP = int(os.getenv("SPARSITY_PATTERN_CAP", str(3 ** 16)))
SPARSE_GRID_CAP = int(os.getenv("SPARSITY_SPARSE_GRID_CAP", "400000"))
SAMPLED_SUPPORTS = int(os.getenv("SPARSITY_SAMPLED_SUPPORTS", "2000"))

# Tolerances
RANGE_TOL = float(os.getenv("SPARSITY_RANGE_TOL", "1e-9"))
SPREAD_FACTOR = float(os.getenv("SPARSITY_SPREAD_FACTOR", "100.0"))

if VERTEX_CAP < 0 or KTERM_CAP < 1 or SUPPORT_CAP < 1:
    raise ValueError("Enumeration caps must be positive!")
