from freeprod.components import (
    ComponentAlgebra,
    calibrated,
    component_from_cyclic,
    component_haagerup_constant,
    trivial_component,
)
from freeprod.words import FreeProduct, FreeWord, free_basis, get_free_product, reduce_product
from freeprod.cells import CellLabel, cell_memberships, classify_cell, verify_partition
from freeprod.blocks import (
    block_by_cell,
    cross_validate_group,
    fp_block,
    free_product_bound_check,
    free_product_bound_scan,
)

__all__ = [
    'ComponentAlgebra',
    'calibrated',
    'component_from_cyclic',
    'component_haagerup_constant',
    'trivial_component',
    'FreeProduct',
    'FreeWord',
    'free_basis',
    'get_free_product',
    'reduce_product',
    'CellLabel',
    'cell_memberships',
    'classify_cell',
    'verify_partition',
    'block_by_cell',
    'cross_validate_group',
    'fp_block',
    'free_product_bound_check',
    'free_product_bound_scan',
]
