
# region verifier violation codes
V_UNKNOWN_ENTITY        = 'unknown-entity'
V_UNKNOWN_PREDICATE     = 'unknown-predicate'
V_WRONG_FORM            = 'wrong-form'              # relationship vs property
V_TYPE_MISMATCH         = 'type-mismatch'
V_REMOVE_ABSENT         = 'remove-absent'
V_ADD_DUPLICATE         = 'add-duplicate'
V_ADD_REMOVE_OVERLAP    = 'add-remove-overlap'
V_MALFORMED_OUTPUT      = 'malformed-output'        # completion did not match the update grammar
# endregion

# region fault catalog (faulty mock backend)
F_DROP_REMOVAL          = 'drop_removal'            # REMOVE line missing     -> malformed-output
F_DROP_ADDITION         = 'drop_addition'           # ADD line missing        -> malformed-output
F_WRONG_ENTITY_NAME     = 'wrong_entity_name'       #                         -> unknown-entity
F_WRONG_PREDICATE       = 'wrong_predicate'         #                         -> unknown-predicate
F_ARITY_ERROR           = 'arity_error'             #                         -> wrong-form
F_DUPLICATE_ADDITION    = 'duplicate_addition'      #                         -> add-duplicate
F_PHANTOM_REMOVAL       = 'phantom_removal'         #                         -> remove-absent
F_CONTRADICTION         = 'contradiction'           #                         -> add-remove-overlap
# endregion

# region retrievers
RETRIEVER_SEARCH        = 'search'
RETRIEVER_BASELINE      = 'baseline'
RETRIEVER_FULL          = 'full'
# endregion

# region ablation variants
VARIANT_S               = 'S'
VARIANT_R_MINUS         = 'R-'
VARIANT_R_MINUS_V       = 'R-_V'
VARIANT_R_PLUS          = 'R+'
VARIANT_R_PLUS_V        = 'R+_V'
VARIANT_R_SEARCH        = 'R^S'
VARIANT_R_SEARCH_V      = 'R^S_V'
# endregion

# region CLI exit codes
EXIT_OK                 = 0
EXIT_UNEXPECTED         = 1
EXIT_CONFIG             = 2
EXIT_FILE_NOT_FOUND     = 3
EXIT_BACKEND            = 4
EXIT_UPDATE_FAILED      = 5
EXIT_PLAN_FAILED        = 6
EXIT_FILE_FORMAT        = 7
EXIT_LOCKED             = 8
# endregion

# region pipeline stages
STAGE_RETRIEVAL         = 'retrieval'
STAGE_GOAL              = 'goal'
STAGE_PROBLEM           = 'problem'
STAGE_GROUNDING         = 'grounding'
STAGE_SEARCH            = 'search'
STAGE_RETRIEVAL_INSUFFICIENT = 'retrieval-insufficient'
# endregion

DEFAULT_CUTOFF = 0.8
DEFAULT_DEPTH = 2
DEFAULT_EDGE_WEIGHT = 1.0       # lambda in mapping_score
DEFAULT_LABEL_BONUS = 0.5       # extra edge credit scaled by relation-label similarity
DEFAULT_RETRY_CAP = 3
DEFAULT_HISTORY_LIMIT = 10_000    # deltas kept by a graph store
DEFAULT_ALWAYS_INCLUDE = ('connected', 'in_room', 'robot_in_room', 'hand_empty', 'robot_holding')
INFINITE_DEPTH = float('inf')

DEFAULT_PLANNER_TIMEOUT = 30.0    # seconds
DEFAULT_EXPANSION_CAP = 200_000
DEFAULT_GROUNDING_CAP = 250_000   # type-compatible action instantiations
DEFAULT_PLATEAU_THRESHOLD = 500   # expansions without heuristic progress before switching to uniform-cost search

GRAPH_FORMAT = 'kgplan-graph'
GRAPH_FORMAT_VERSION = 1

_defined = dict(locals())
VIOLATION_CODES = tuple(v for k, v in _defined.items() if k.startswith('V_'))
FAULTS = tuple(v for k, v in _defined.items() if k.startswith('F_'))
CORE_FAULTS = FAULTS[:6]
RETRIEVERS = (RETRIEVER_SEARCH, RETRIEVER_BASELINE, RETRIEVER_FULL)
VARIANTS = tuple(v for k, v in _defined.items() if k.startswith('VARIANT_'))

FAULT_VIOLATIONS = {
    F_DROP_REMOVAL: V_MALFORMED_OUTPUT,
    F_DROP_ADDITION: V_MALFORMED_OUTPUT,
    F_WRONG_ENTITY_NAME: V_UNKNOWN_ENTITY,
    F_WRONG_PREDICATE: V_UNKNOWN_PREDICATE,
    F_ARITY_ERROR: V_WRONG_FORM,
    F_DUPLICATE_ADDITION: V_ADD_DUPLICATE,
    F_PHANTOM_REMOVAL: V_REMOVE_ABSENT,
    F_CONTRADICTION: V_ADD_REMOVE_OVERLAP,
}
