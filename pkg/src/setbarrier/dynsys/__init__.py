"""Vector fields, range bounding, flow enclosure and built-in benchmarks."""
from .benchmarks import BENCHMARK_NAMES, benchmark
from .expr import (Add, Const, Cos, Div, Exp, Expr, Mul, Neg, Pow, Sin, Sub, Var,
                   cos, exp, expr_eval, expr_range, parse_expr, sin, variables)
from .systems import (SystemSpec, bisect_widest, box, flow_box_batch, flow_enclose,
                      load_system, system_from_dict)

__all__ = [
    "Add", "Const", "Cos", "Div", "Exp", "Expr", "Mul", "Neg", "Pow", "Sin", "Sub", "Var",
    "cos", "exp", "sin", "variables", "expr_eval", "expr_range", "parse_expr",
    "SystemSpec", "box", "flow_enclose", "flow_box_batch", "bisect_widest",
    "load_system", "system_from_dict", "benchmark", "BENCHMARK_NAMES",
]
