"""
Shared configuration: paths, tolerances and defaults.
"""

from pathlib import Path

# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------
PRESETS_DIR = Path(__file__).resolve().parent / "presets"
EXAMPLE_PRESET = PRESETS_DIR / "worked_example.json"

CONFIG_SCHEMA = "quantcoop/1"

# ---------------------------------------------------------------------------
# Numerical tolerances
# ---------------------------------------------------------------------------
ZERO_EIG_TOL = 1e-9            # |lambda| <= tol * max(1, ||m||) counts as zero
RANK_TOL = 1e-10               # relative to the largest singular value
UNSTABLE_TOL = 1e-9            # |lambda| >= 1 - tol counts as unstable
EIG_CLUSTER_TOL = 1e-6         # eigenvalues this close (relative) are one defective mode
PI_CLAMP = 1e-12               # entries of pi below this are set to zero
QUANT_BOUNDARY_TOL = 1e-12     # relative snap window around bin edges
UNDERFLOW_GUARD = 1e-280       # gamma^(t-1) below this ends a run
MAX_EIG_DIM = 64
ORACLE_RTOL = 1e-8

# ---------------------------------------------------------------------------
# Synthesis defaults
# ---------------------------------------------------------------------------
EPSILON_GRID = (1e-3, 1e-2, 1e-1, 1.0)
DEFAULT_SEARCH_BUDGET = 10**4
DEFAULT_RESTARTS = 8
LEVEL_SEARCH_CAP = 2**14
LEVEL_OVERFLOW = 2**62         # level counts above this are reported as overflow
WITNESS_MARGIN = 2.0           # a = margin * (right-hand side of the a-inequality)

# ---------------------------------------------------------------------------
# Simulation defaults
# ---------------------------------------------------------------------------
DEFAULT_HORIZON = 500
DEFAULT_SEED = 7
DEFAULT_OUT_DIR = Path("runs")
DEFAULT_DECAY_WINDOW = (50, 200)
DEFAULT_TRIALS = 100

# Acceptance thresholds for the bundled reproduction
REPRO_TARGET = 1e-6
REPRO_MAX_DECAY = 0.96
REPRO_LIMIT_STEP = 200
REPRO_LIMIT_TOL = 1e-4
