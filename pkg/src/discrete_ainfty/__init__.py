"""Exact discrete differential forms on ordered simplicial complexes and their A∞ tower."""
from .complex import ABSENT, CATALOGUE, EMPTY, ComplexError, OrderedComplex, load_complex
from .chains import Chain, GradedOperator, GradeError, block, tuple_space
from .calculus import d_operator, del_operator, lift, wedge_operator
from .locality import LocalityError, cells, laplacian, laplacian_local, local_inverse, local_K
from .ainfty import (FLAVORS, AInftyTower, ContractError, TopologyError, associator,
                     build_tower, conjugator, formula_table, verify_all_relations)

__version__ = "0.1.0"
