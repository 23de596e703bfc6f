"""
Shared constants: method defaults, file-format magic, synthetic task layout.
"""

from typing import Dict, Tuple

# Flow quantisation and loss
DEFAULT_CLUSTERS = 40
DEFAULT_TOP_K = 10
LOG_EPS = 1e-12
F_MAX_PERCENTILE = 99.0

# Optimisation schedule
DEFAULT_BASE_LR = 0.001
DEFAULT_LR_STEP = 70000
DEFAULT_LR_GAMMA = 0.1
DEFAULT_HEAD_MULTIPLIER = 10.0
FROZEN_CONV_LAYERS = 3

# Pooling
DEFAULT_POOL_SIZE = 3
DEFAULT_POOL_STRIDE = 2

# Saliency
DEFAULT_PATCH_SIZE = 3
DEFAULT_RADIUS = 3
DEFAULT_TEMPERATURE = 0.2
DEFAULT_OTSU_BINS = 256
LUMA_WEIGHTS: Tuple[float, float, float] = (0.299, 0.587, 0.114)

# File formats
WEIGHTS_MAGIC = b"PSMW"
WEIGHTS_VERSION = 1
CODEBOOK_HEADER = "POFCB v1"
POFSM_HEADER = "POFSM v1"
# POF-SM channel values live on this dyadic grid (exact in float32, 1 - v exact).
CHANNEL_GRID = 2 ** 24

MANIFEST_COLUMNS = ("path", "label", "group", "split")
SPLITS = ("train", "test")
IMAGE_EXTENSIONS = (".ppm", ".pgm", ".png", ".jpg", ".jpeg", ".bmp")

# Synthetic motion classes: unit direction (u right, v down)
MOTION_DIRECTIONS: Dict[str, Tuple[float, float]] = {
    "left": (-1.0, 0.0),
    "right": (1.0, 0.0),
    "up": (0.0, -1.0),
    "down": (0.0, 1.0),
    "still": (0.0, 0.0),
    "oscillate": (1.0, 0.0),
}

# Classes that swing back and forth along their direction; a still frame
# catches them at a random phase of the swing
OSCILLATING_MOTIONS: Tuple[str, ...] = ("oscillate",)

# Group of each motion class, used for group-level MAP
MOTION_GROUPS: Dict[str, str] = {
    "left": "horizontal",
    "right": "horizontal",
    "up": "vertical",
    "down": "vertical",
    "still": "static",
    "oscillate": "periodic",
}

SHAPE_KINDS = ("square", "disc", "cross", "diamond")

# Desk protocol: source task A pretrains, target task B fine-tunes
SOURCE_TASK = {
    "shapes": ("square", "disc"),
    "motions": ("left", "right", "up", "down", "still"),
}
TARGET_TASK = {
    "shapes": ("cross", "diamond"),
    "motions": ("up", "down", "still"),
}
