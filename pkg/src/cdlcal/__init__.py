"""Calibration decision loss metrics and an online predictor that keeps it small."""

from .adversary import GreedyAdversary, IIDAdversary, ScriptedAdversary, parse_adversary
from .expert_oracle import ExpertOracle
from .harness import fixture, rate_report, sweep
from .lp import LinearProgram, Status, solve
from .metrics import (MetricReport, attribute_bound, cdl, cfdl, cfdl_v, compute_report, deviation_stat,
                      distcal_upper, ece, l2cal, smcal, ucal, vcdl)
from .predictor import (PredictionDistribution, PredictorConfig, round_distribution, run_algorithm1,
                        run_truthful_baseline)
from .scoring import (SmoothConvexRule, TabularScoringRule, VShapedRule, breg, decompose_check, score_v,
                      v_rule_as_tabular, vbreg)
from .transcript import BucketProfile, Grid, Transcript, bucketize, read_transcript, write_transcript

__all__ = [
    "BucketProfile", "ExpertOracle", "GreedyAdversary", "Grid", "IIDAdversary", "LinearProgram", "MetricReport",
    "PredictionDistribution", "PredictorConfig", "ScriptedAdversary", "SmoothConvexRule", "Status",
    "TabularScoringRule", "Transcript", "VShapedRule", "attribute_bound", "breg", "bucketize", "cdl", "cfdl",
    "cfdl_v", "compute_report", "decompose_check", "deviation_stat", "distcal_upper", "ece", "fixture", "l2cal",
    "parse_adversary", "rate_report", "read_transcript", "round_distribution", "run_algorithm1",
    "run_truthful_baseline", "score_v", "smcal", "sweep", "ucal", "v_rule_as_tabular", "vbreg", "write_transcript",
]
