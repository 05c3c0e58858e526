from .tensor import (
    DomainError,
    GradientMap,
    ShapeError,
    Tensor,
    add,
    backward,
    concat,
    constant,
    conv2d_same,
    dropout,
    exp,
    forward_op,
    gather,
    log,
    log_softmax,
    matmul,
    mul,
    narrow,
    parameter,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax,
    square,
    stop_gradient,
    sub,
    take_rows,
    tanh,
    tmax,
    tmean,
    transpose,
    tsum,
)
from .optim import MissingGradientError, OptimizerState, optimizer_step
from .checkpoint import apply_checkpoint, load_checkpoint, save_checkpoint
