from .report import (MetricReport, aggregate, build_instances, compute_all,
                     evaluate_run, evaluate_runs, format_table, human_baseline,
                     references_by_album, save_report)
from .scores import EvalInstance, bleu, cider, meteor_lite, rouge_l
from .stemmer import stem

__all__ = [
    "EvalInstance", "MetricReport", "aggregate", "bleu", "build_instances",
    "cider", "compute_all", "evaluate_run", "evaluate_runs", "format_table",
    "human_baseline", "meteor_lite", "references_by_album", "rouge_l",
    "save_report", "stem",
]
