from enum import Enum


class AesVariant(Enum):
    T_AES = "T-AES"
    B_AES = "B-AES"


class PadMode(Enum):
    shared_otp = "shared_otp"
    pad_group = "pad_group"


class MacMode(Enum):
    naive = "naive"
    position_bound = "position_bound"


class VerifyLevel(Enum):
    opt_blk = "optBlk"
    layer = "layer"
    model = "model"


class VerifyOutcome(Enum):
    passed = "pass"
    failed = "fail"


class LayerKind(Enum):
    conv = "conv"
    fc = "fc"
    # channel-wise ops (depthwise conv, pooling): K == C, one input channel per output channel
    other = "other"


class Direction(Enum):
    read = "read"
    write = "write"


class EventClass(Enum):
    data = "data"
    vn = "vn"
    mac = "mac"
    tree_node = "tree_node"


class SchemeKind(Enum):
    unprotected = "unprotected"
    sgx_like = "sgx_like"
    mgx_like = "mgx_like"
    seda = "seda"


class MacResidency(Enum):
    on_chip = "on_chip"
    off_chip = "off_chip"


class LayerVerify(Enum):
    speculative = "speculative"
    stall = "stall"


class AttackKind(Enum):
    seca = "seca"
    repa = "repa"


class NpuProfile(Enum):
    server = "server"
    edge = "edge"
    custom = "custom"
