from .adequacy import accuracy, adequacy_judge
from .bleu import BleuReport, corpus_bleu, tokenize
from .correlation import CorrelationReport, correlate, kendall, pearson, spearman
from .judge import Criterion, JudgeScore, ScoreCard, judge, llm_avg, parse_score, score_card

__all__ = [
    "BleuReport", "CorrelationReport", "Criterion", "JudgeScore", "ScoreCard",
    "accuracy", "adequacy_judge", "corpus_bleu", "correlate", "judge", "kendall",
    "llm_avg", "parse_score", "pearson", "score_card", "spearman", "tokenize",
]
