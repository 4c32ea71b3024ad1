"""Reward orchestration and evaluation for multi-role dialogue summarization:
group-relative reward scoring for candidate summaries, language-aware lexical
and embedding metrics, claim-level faithfulness, and reasoning-trace
distillation tooling."""

from .backends import (
    BackendError,
    ChatClient,
    ChatRequest,
    ChatResponse,
    EmbeddingClient,
    EntailmentClient,
    FixtureError,
    FixtureStore,
    PreferenceClient,
    ProtocolError,
    TokenEmbeddings,
    canonical_request,
    request_key,
)
from .config import Config, ConfigError, build_engine, build_evaluator, load_config
from .corpus import (
    AnnotatedExample,
    CorpusError,
    DatasetSplit,
    Dialogue,
    DialogueTurn,
    FormatError,
    ReasoningTrace,
    build_distillation_prompt,
    distill_dataset,
    load_dataset,
    load_jsonl,
    load_split,
    make_grpo_eval_split,
    parse_distilled_output,
    serialize_distilled_output,
    write_jsonl,
)
from .evaluation import (
    EvalReport,
    Evaluator,
    FaithfulnessResult,
    LanguageSupportError,
    evaluate_faithfulness,
    faithfulness_score,
    load_predictions,
    write_report,
)
from .lang import GreedyLexiconSegmenter, LanguageTag, TokenSequence, detect_language, tokenize
from .lexical import RougeScore, length_reward, rouge_all, rouge_l, rouge_n, rouge_reward
from .rewards import (
    CandidateGroup,
    ComponentError,
    GroupResult,
    JudgeFormatError,
    JudgeVerdict,
    RewardComponents,
    RewardEngine,
    RewardWeights,
    base_reward,
    group_advantages,
    group_stats,
    load_groups,
    parse_judge_verdict,
    principle_scores,
    write_groups,
)
from .semantic import GreedyMatchScore, bertscore_f1, greedy_match, similarity_matrix

__version__ = "0.1.0"
