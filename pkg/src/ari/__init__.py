"""Temporal knowledge-graph question answering with induced reasoning methodologies."""

from __future__ import annotations

from .actions import ActionExpr, ResultSet, StepEnv, execute_action, parse_action, render_action
from .candidates import CandidateSet, enumerate_candidates, filter_candidates
from .embedding import HashingEmbedder, cosine_similarity, embed_text
from .evaluation import MetricsReport, QuestionRecord, evaluate_run, load_questions, stratified_sample
from .llm import CompletionRequest, LLMGateway, RemoteLLM, ScriptedLLM
from .matching import match_answer
from .memory import Episode, HistoryStore, MethodologyBank, MethodologyCluster, cluster_history, induce_methodology, select_methodology
from .reasoner import ReasonerConfig, Trace, answer_question, build_action_prompt
from .temporal import Timestamp
from .tkg import TemporalFact, TemporalKG, load_facts

__version__ = "0.1.0"

__all__ = [
    "ActionExpr",
    "CandidateSet",
    "CompletionRequest",
    "Episode",
    "HashingEmbedder",
    "HistoryStore",
    "LLMGateway",
    "MethodologyBank",
    "MethodologyCluster",
    "MetricsReport",
    "QuestionRecord",
    "ReasonerConfig",
    "RemoteLLM",
    "ResultSet",
    "ScriptedLLM",
    "StepEnv",
    "TemporalFact",
    "TemporalKG",
    "Timestamp",
    "Trace",
    "answer_question",
    "build_action_prompt",
    "cluster_history",
    "cosine_similarity",
    "embed_text",
    "enumerate_candidates",
    "evaluate_run",
    "execute_action",
    "filter_candidates",
    "induce_methodology",
    "load_facts",
    "load_questions",
    "match_answer",
    "parse_action",
    "render_action",
    "select_methodology",
    "stratified_sample",
]
