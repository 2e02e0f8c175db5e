"""Goodness-of-fit detection of statistical watermarks in generated token streams."""

from .calibrate import CriticalRecord, CriticalTable, asymptotic_critical, mc_critical, mc_criticals
from .edits import EditKind, EditSpec, delete_tokens, inforich_edit, substitute_tokens
from .gof import Detector, TestVerdict, detect, make_detector, parse_detector, statistic, to_pvalues
from .harness import ExperimentConfig, ResultRow, run_robustness, run_type1, run_type2
from .schemes import GUMBEL, INVERSE, SYNTHID, Kind, PivotSeq, SchemeSpec, null_cdf
from .textsim import SimModel, extract_pivots, generate_plain, generate_watermarked

__version__ = "0.1.0"
