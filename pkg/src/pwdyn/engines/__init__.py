from pwdyn.engines.closed_form import (assemble, assemble_lambda_damping, assemble_lambda_dephasing,
                                       corner_block, corner_scalar, scalar_functional)
from pwdyn.engines.master import (integrate_budini, integrate_master_equation, master_equation_map,
                                  renewal_kernel_k, reset_equation_residual)
from pwdyn.engines.montecarlo import simulate_monte_carlo
from pwdyn.engines.process import MapTrajectory, ProcessSpec, ScalarSolution, StateSeries
from pwdyn.engines.volterra import EngineError, solve_volterra_map

__all__ = [
    "EngineError", "MapTrajectory", "ProcessSpec", "ScalarSolution", "StateSeries",
    "assemble", "assemble_lambda_damping", "assemble_lambda_dephasing", "corner_block",
    "corner_scalar", "integrate_budini", "integrate_master_equation", "master_equation_map",
    "renewal_kernel_k", "reset_equation_residual", "scalar_functional", "simulate_monte_carlo", "solve_volterra_map",
]
