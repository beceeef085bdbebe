from .world import WorldSpec, generate_world, describe
from .events import SimEvent, EventGenerator
from .tasks import SimTask, TaskGenerator, resync_delta
from .simulation import Simulation, generate, truth_entry
from .scoring import StateScore, PlanScore, VariantScore, ScoreBoard, score_state_change, score_plan
from .ablation import Variant, VARIANTS, parse_variants, run_variant, run_ablation
from .demo import SCENARIOS, load_demo_world, demo_truth_book, run_scenario
