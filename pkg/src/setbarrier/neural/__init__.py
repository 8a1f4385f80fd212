"""Network definition, set propagation and parameter gradients."""
from .autodiff import param_grad
from .enclosure import (GradientSet, SetTrace, act_deriv_bounds, act_deriv_bounds_t, act_enclose,
                        act_enclose_t, forward_set, gradient_set, nn_forward_set, nn_gradset,
                        product_bounds)
from .network import (PRESETS, RNG_ALGORITHM, Network, load_model, nn_forward, nn_init,
                      resolve_arch, save_model)

__all__ = [
    "Network", "nn_init", "nn_forward", "resolve_arch", "PRESETS", "RNG_ALGORITHM",
    "save_model", "load_model", "SetTrace", "GradientSet", "act_enclose", "act_deriv_bounds",
    "act_enclose_t", "act_deriv_bounds_t", "forward_set", "gradient_set", "product_bounds",
    "nn_forward_set", "nn_gradset", "param_grad",
]
