"""Physical constants and simulator defaults.

Lengths are millimeters, angles radians unless a name says otherwise.
"""

import math

# Intersection guard applied after every bounce
RAY_EPSILON_MM = 1e-9
# Grazing arc hits inside this discriminant band are misses
GRAZING_DISCRIMINANT = 1e-12

# Media. PDMS index is a typical literature value, not a measured one.
AIR_INDEX = 1.0
PDMS_INDEX = 1.41

# Sensor head, read off the to-scale cross-section diagrams
HALF_FOV_DEG = 12.5
EMITTER_RECEIVER_SEPARATION_MM = 3.0
RECEIVER_APERTURE_HALF_WIDTH_MM = 0.5
EMITTER_RAYS = 181
SCATTER_RAYS = 33

# Elastomer geometry
FLAT_THICKNESS_MM = 17.75
ARC_THICKNESS_MM = 17.75
BLOCKER_THICKNESS_MM = 23.5
BLOCKER_CLEARANCE_MM = 6.0
BOUNDARY_SPAN_MM = 12.0

# Spring: 10 N full scale at 5 mm indentation
SPRING_STIFFNESS_N_PER_MM = 2.0
SPRING_MAX_FORCE_N = 10.0

# Trace termination
POWER_FLOOR = 1e-6
BOUNCE_CAP = 8
# Half-length of the target plane; effectively infinite at desk scale
TARGET_HALF_LENGTH_MM = 1000.0

# No-signal range sentinel
RANGE_NO_SIGNAL = -1.0

# Target reflectivities: dark / mid / light
DEFAULT_REFLECTIVITIES = (0.17, 0.5, 0.85)
MAX_PROXIMITY_MM = 50.0

# Calibration
FIT_GRADIENT_TOLERANCE = 1e-10
FIT_MAX_ITERATIONS = 200
EXTRAPOLATION_MARGIN = 0.2
CONTACT_RANGE_DROP_MM = 2.0

# Optimizer
GRID_POINTS = 25
GOLDEN_SWEEPS = 3
SENSITIVITY_DEPTHS_MM = (1.0, 2.0, 3.0, 4.0, 5.0)
SENSITIVITY_REFLECTIVITY = 0.5
DEFOCUS_WEIGHT = 1e-3

INV_PHI = (math.sqrt(5) - 1) / 2

# Output schema versions
CSV_SCHEMA_VERSION = 1
TEXT_FORMAT_VERSION = 1
