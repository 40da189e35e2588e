"""
Configuration file for estimation defaults and limits
Adjust these values based on your problem sizes and accuracy requirements
"""

# Penalty Shape Defaults
SCAD_A = 3.7              # SCAD concavity constant, must be > 2
MCP_GAMMA = 3.0           # MCP concavity constant, must be > 1
BRIDGE_EXPONENT = 0.5     # L_q bridge exponent
ADAPTIVE_GAMMA = 1.0      # Exponent on the initial estimate in adaptive weights
PENALTY_EPSILON = 0.0     # Guard added to |beta| in divergent derivatives

# Local Quadratic Approximation
LQA_TAU = 1e-6            # Coefficients below this are dropped for good
LQA_MAX_ITER = 500
LQA_TOL = 1e-8

# Coordinate Descent
CD_TOL = 1e-8             # KKT residual accepted as converged
CD_MAX_ITER = 100_000     # Sweeps (full + active-set) before giving up
CD_RELATIVE_TOL = 1e-12   # KKT floor as a fraction of max |X'y|, for badly scaled responses
CD_ACTIVE_SWEEPS = 200    # Active-set sweeps between full sweeps before the support is solved directly

# IRLS for the binomial likelihood
IRLS_TOL = 1e-8           # Max coefficient change between outer steps
IRLS_MAX_OUTER = 100
IRLS_MAX_HALVINGS = 20
IRLS_WEIGHT_FLOOR = 1e-5
IRLS_DIVERGENCE_WINDOW = 5  # Outer steps of steadily growing ||beta|| read as divergence
SEPARATION_LP_TOL = 1e-7    # Margin the separation LP must beat, relative to max |x_ij|

# Multi-step LLA
LLA_TOL = 1e-6
LLA_MAX_STEPS = 20
MSA_EPSILON = 1e-6

# Tuning
N_LAMBDAS = 50            # Points in the log-spaced lambda grid
LAMBDA_MIN_RATIO = 1e-3   # Smallest grid point relative to lambda_max
CV_FOLDS = 5
GAMMA_GRID = (0.5, 1.0, 2.0)
BIC_RSS_FLOOR = 1e-12

# Initial Estimators
RIDGE_PENALTY = 1e-3      # Diagonal added to X'X for the ridge initial
ENET_L1_RATIO = 0.5

# Exhaustive Search
SUBSET_P_CAP = 20         # 2^20 subset refits is the most we agree to enumerate

# Recovery Check
RECOVERY_LAMBDA_RATIO = 1e-10   # "lambda -> 0+" as a fraction of lambda_max

# Default Simulation Scenario
DEFAULT_BETA_STAR = (3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0)
DEFAULT_RHO = 0.5
DEFAULT_N = 120
DEFAULT_SIGMA = 1.0

# CSV Input Limits
MAX_FILE_SIZE_MB = 200
MAX_ROWS = 1_000_000
MAX_COLUMNS = 200

# Output Formatting
PATH_SIGNIFICANT_DIGITS = 12
SUMMARY_SIGNIFICANT_DIGITS = 6

# Parallelism
THREADS_ENV_VAR = "ONESTEP_THREADS"
DEFAULT_THREADS = 1       # Reproducibility by default
