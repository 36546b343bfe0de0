# Training engine: layers, network, momentum SGD
from .network import Network, ForwardCache, build_network
from .training import (
    GradientMask, StepOutput, Evaluation, apply_gradient_mask, sgd_step,
    train_epochs, evaluate, zero_velocity,
)
