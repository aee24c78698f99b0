"""Few-body bound states and elastic scattering from spline-collocation
solvers for chained-coordinate amplitude equations, plus the combinatorics
of the coordinate chains themselves.

Public names are imported from their home submodule on first access, so
importing the package itself stays free of numerical imports; the command
line front end relies on that to pin the linear-algebra thread count
before numpy loads its backend.
"""

from importlib import import_module

__version__ = "0.1.0"

_HOMES = {
    "Grid1D": "basis",
    "SplineBasis": "basis",
    "QuadratureRule": "basis",
    "TensorCoefficients": "basis",
    "make_grid": "basis",
    "collocation_points": "basis",
    "spline_value": "basis",
    "gauss_legendre": "basis",
    "tensor_eval": "basis",
    "NoBoundStateError": "twobody",
    "PotentialSpec": "twobody",
    "PairSolution": "twobody",
    "potential_eval": "twobody",
    "solve_pair": "twobody",
    "PartitionChain": "chains",
    "ChainClass": "chains",
    "chain_count": "chains",
    "class_count_estimate": "chains",
    "enumerate_chains": "chains",
    "classify_chains": "chains",
    "emit_tree": "chains",
    "KrylovError": "krylov",
    "SolverStats": "krylov",
    "LinearOperator": "krylov",
    "KroneckerPreconditioner": "krylov",
    "bicgstab": "krylov",
    "inverse_iteration": "krylov",
    "SWaveSystem3": "fy3",
    "Problem3": "fy3",
    "SolveResult3": "fy3",
    "map3": "fy3",
    "system3": "fy3",
    "apply_L3": "fy3",
    "apply_R3": "fy3",
    "solve_bound3": "fy3",
    "solve_elastic3": "fy3",
    "residual3": "fy3",
    "Maps4Result": "fy4",
    "Problem4": "fy4",
    "SolveResult4": "fy4",
    "maps4": "fy4",
    "apply_operator4": "fy4",
    "solve_bound4": "fy4",
}

__all__ = sorted(_HOMES) + ["__version__"]


def __getattr__(name):
    home = _HOMES.get(name)
    if home is None:
        raise AttributeError("module %r has no attribute %r"
                             % (__name__, name))
    value = getattr(import_module("." + home, __name__), name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(set(list(globals()) + __all__))
