"""Cross validation of crowd-sensed data by a validating crowd."""

from .incentives import IncentiveReport, linear_payment, reputation_update, revise_payments, update_reputations
from .pacap import CampaignConfig, CampaignResult, CycleStats, RatingTask, Response, next_outreach, run_campaign
from .profiling import Bin, Profile, Reading, build_profile
from .registry import PrivacyAction, RegistryParams, Worker, WorkerRegistry, apply_privacy_action, selection_weight
from .reshaping import BinTally, Rating, RatingScale, ReshapedProfile, reshape, tally_ratings
from .sampling import SamplingStrategy, draw_value, strategy_weights
from .simulator import BehaviorParams, Peak, ScenarioReport, ScenarioSpec, generate_dataset, run_scenario, simulate_response

__version__ = "0.1.0"
