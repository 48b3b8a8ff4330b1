import os

SETTINGS_PATH = "settings.env"
DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
MODEL_DIR = os.path.join(DATA_DIR, "models")

LOG_DIR = "logs"
LOG_FILE = "seda_sim.log"
LOG_LEVEL = "INFO"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# Fixture secrets, overridden by SEDA_ENC_KEY / SEDA_MAC_KEY in settings.env
DEFAULT_ENC_KEY_HEX = "2b7e151628aed2a6abf7158809cf4f3c"
DEFAULT_MAC_KEY_HEX = "000102030405060708090a0b0c0d0e0f"

# AES-128
AES_BLOCK_BYTES = 16
AES_ROUNDS = 10
ROUND_KEY_COUNT = AES_ROUNDS + 1

# Counters and MACs
VN_BITS = 56
MAC_BYTES = 8
MAC_HEADER_BYTES = 32  # PA(8) VN(8) layer(4) fmap(4) blk(4), padded to 16 B

# Engine cost model, shape-only calibration
AES_AREA_UNITS = 100.0
AES_POWER_UNITS = 100.0
XOR_BANK_AREA_UNITS = 2.0
XOR_BANK_POWER_UNITS = 2.0
AES_LATENCY_CYCLES = 11
COST_MODEL_MULTIPLES = (1, 2, 4, 8, 16, 32)

# Protection schemes
PROTECTION_BLOCK_CHOICES = (64, 512)
PROTECTED_MEMORY_BYTES = 16 * 1024 ** 3
VN_CACHE_BYTES = 16 * 1024
MAC_CACHE_BYTES = 8 * 1024
CACHE_LINE_BYTES = 64
CACHE_WAYS = 4
TREE_ARITY = 8
VNS_PER_LINE = 8
VN_LINE_BYTES_PER_BLOCK = CACHE_LINE_BYTES // VNS_PER_LINE
MAC_SECTOR_BYTES = MAC_BYTES

# Workload
BURST_BYTES = 64
MAX_EVENT_BYTES = 512
OPT_BLK_CANDIDATES = (64, 128, 256, 512)

# DRAM
DRAM_CHANNELS = 4
DRAM_ACCESS_LATENCY_NS = 30.0
DRAM_INTERLEAVE_BYTES = 64

NPU_PROFILES = {
    "server": {
        "pe_rows": 256,
        "pe_cols": 256,
        "sram_bytes": 24 * 1024 * 1024,
        "freq_ghz": 1.0,
        "dram_channels": 4,
        "dram_gbps_per_channel": 5.0,
        "element_bytes": 1,
    },
    "edge": {
        "pe_rows": 32,
        "pe_cols": 32,
        "sram_bytes": 480 * 1024,
        "freq_ghz": 2.75,
        "dram_channels": 4,
        "dram_gbps_per_channel": 2.5,
        "element_bytes": 1,
    },
}

# Experiment
DEFAULT_SCHEMES = ("unprotected", "sgx_64", "sgx_512", "mgx_64", "mgx_512", "seda")
# bundled tables under data/models
BENCHMARK_MODELS = (
    "lenet",
    "alexnet",
    "mobilenet",
    "resnet18",
    "googlenet",
    "yolo_tiny",
    "alphagozero",
    "fasterrcnn",
)
DEFAULT_MODELS = BENCHMARK_MODELS
# SeDA traffic and runtime stay within 1% of the unprotected run
SEDA_OVERHEAD_BOUND = 0.01
DEFAULT_SEED = 2024
DEFAULT_OUT_DIR = "results"
ATTACK_TRIALS = 100
ATTACK_BLOCKS_PER_TRIAL = 16
ATTACK_ZERO_FRACTION = 0.75

TRAFFIC_CSV = "traffic.csv"
PERFORMANCE_CSV = "performance.csv"
ATTACKS_CSV = "attacks.csv"
COST_MODEL_CSV = "cost_model.csv"
OPTBLK_CSV = "optblk.csv"
PLOT_DATA_CSV = "plot_data.csv"

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_INVARIANT_VIOLATION = 2
