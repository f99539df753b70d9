"""Deterministic simulator and algorithm library for data shuffles on
bandwidth-annotated tree networks, with exact capacity-cost accounting and
the matching communication lower bounds."""

from .rational import INF, dec12, parse_bw
from .topology import (COMPUTE, ROUTER, Cover, EdgeCut, OrientedTree, Topology,
                       build_star, build_symmetric_tree, edge_cut,
                       enumerate_minimal_covers, mpc_star, normalize_tree,
                       orient, unique_path)
from .simkernel import (CostReport, Distribution, NodeState, Runtime,
                        TrafficTrace, adversarial_sort_instance, cost,
                        make_hash, send, skewed_join_instance,
                        uniform_instance, verify_cartesian,
                        verify_intersection, verify_join, verify_sorted)
from .bounds import (BoundReport, EXHAUSTIVE, VARIANT_GENERAL,
                     VARIANT_RECEIVING_FREE, VARIANT_SENDING_FREE,
                     eq1_minimizer, lb_asym_star, lb_cartesian_cover,
                     lb_cartesian_cut, lb_cp_unequal, lb_intersect_tree,
                     lb_join_star, lb_sorting)
from .intersect import (EdgeClasses, Partition, balanced_partition,
                        classify_edges, star_intersect, tree_intersect)
from .asymstar import (SplitResult, asym_star_intersect, opt_split, opt_split3,
                       rf_star_intersect, sf_star_intersect)
from .cartesian import (GridLabeling, SquarePlan, TreeWeights,
                        generalized_star_cartesian, pack_squares,
                        star_cartesian, tree_cartesian, tree_pack,
                        tree_weights, whc_execute, whc_plan, whc_unequal)
from .sortnet import (SortPlan, proportional, send_all_to_max, terasort,
                      valid_ordering, wts_sort)
from .joinstar import (KeyStats, PackStrategy, VirtualKey, pack_eqcp, packcp,
                       split_skew, star_join, weighted_hash_join)
from .oracle import (OracleResult, opt_one_round, opt_packcp_assignment,
                     sandwich_check)

__version__ = "0.1.0"
