"""Mutation operators, equivalence transforms, and mutation trees."""

from .common import MutationError, MutationRecord
from .operators import (
    CATEGORIES, LEVEL2_POOL, VARIANTS, MutationOperator, apply_mutation,
    enumerate_sites, replay_mutation, variant_sites,
)
from .equivalence import (
    ALL_TRANSFORMS, EQUIV_CATEGORIES, TRANSFORMS, EquivalenceTransform,
    apply_equivalence, applicable, replay_equivalence, transform_sites,
)
from .tree import (
    MutationTree, Shortfall, TreeConfig, TreeNode, build_forest, build_tree, replay_node,
    replay_tree, verify_provenance,
)
