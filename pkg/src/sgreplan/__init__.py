"""Scene-graph failure detection and proactive replanning for household task plans."""
import logging

from .core import (ConfigurationError, Edge, GoalCondition, ObjectNode, Plan, SceneGraph, Subtask,
                   TaskSpec, Vocabulary, VocabularyError, default_vocab, eval_goal, validate_graph)
from .embed import EmbeddingProvider, ProviderConfig, builtin_provider, cosine
from .graphbuild import GeometryParams, Observation, ObservedObject, build_scene_graph
from .simmatch import MatchToggles, SimilarityReport, graph_similarity, match_nodes
from .membank import (Buffer, DemonstrationRecord, RetrievalConfig, load_buffer,
                      record_demonstration, retrieve_references, save_buffer)
from .detect import (DetectionDecision, DetectorConfig, object_count_check, posthoc_verify,
                     proactive_check)
from .replan import Diagnosis, Reasoner, ReasonRequest, RecoveryPlan, RuleReasoner, build_request
from .harness import (EpisodeResult, HarnessConfig, Report, Strategy, build_buffer, run_ablations,
                      run_benchmark, run_episode, run_sweep)

logging.getLogger(__name__).addHandler(logging.NullHandler())

__version__ = "0.1.0"
