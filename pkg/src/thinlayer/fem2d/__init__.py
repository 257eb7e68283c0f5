"""Plane-strain finite elements for the fine layered structure."""
from .assembly import (DisplacementField, SolverError, SparseSystem, assemble, energy, solve,
                       stiffness)
from .mesh import (BEAM, BULK, EmptyLayerError, JacobianError, Mesh2D, MeshError, MeshResolution,
                   ResolutionError, build_mesh, structured_mesh)
from .post import StressField, TraceData, recover_stress, trace_jump, trace_l2, write_trace_csv, write_vtk

__all__ = [
    "BEAM", "BULK", "DisplacementField", "EmptyLayerError", "JacobianError", "Mesh2D",
    "MeshError", "MeshResolution", "ResolutionError", "SolverError", "SparseSystem",
    "StressField", "TraceData", "assemble", "build_mesh", "energy", "recover_stress", "solve",
    "stiffness", "structured_mesh", "trace_jump", "trace_l2", "write_trace_csv", "write_vtk",
]
