"""Port-Hamiltonian and baseline models"""

from sphs.models.phs import (
    KINDS,
    ModelSpec,
    PhsModel,
    build_model,
    hamiltonian,
    grad_hamiltonian,
    rhs,
    decompose,
    supply_rate,
    structure_matrices,
)

__all__ = [
    'KINDS',
    'ModelSpec',
    'PhsModel',
    'build_model',
    'hamiltonian',
    'grad_hamiltonian',
    'rhs',
    'decompose',
    'supply_rate',
    'structure_matrices',
]
