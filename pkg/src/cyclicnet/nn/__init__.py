from cyclicnet.nn.functional import (
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    flatten_backward,
    flatten_forward,
    maxpool2d_backward,
    maxpool2d_forward,
    relu_backward,
    relu_forward,
)
from cyclicnet.nn.layers import (
    Conv2D,
    CyclicPool,
    CyclicRoll,
    CyclicSlice,
    CyclicStack,
    Dense,
    FeatureShape,
    Flatten,
    LAYER_TYPES,
    MaxPool2D,
    ReLU,
    layer_from_config,
)
from cyclicnet.nn.losses import rmse, softmax, softmax_cross_entropy
from cyclicnet.nn.network import Network, Tape, TapeNode, count_params, infer_shapes
from cyclicnet.nn.optim import AdamState, adam_step, lr_schedule
