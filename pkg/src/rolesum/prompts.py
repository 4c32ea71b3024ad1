"""Prompt templates shared by the distillation, judging, and claim pipelines.

Templates are plain strings rendered with str.format; dialogue text is always
serialized as one ``Speaker: text`` line per turn before insertion.
"""

from __future__ import annotations

THINK_OPEN = "<think>"
THINK_CLOSE = "</think>"

# Teacher prompt for generating a reasoning trace ahead of the summary. The
# worked example doubles as the format contract the parser enforces.
DISTILLATION_PROMPT = """\
You are a large language model participating in a knowledge distillation process \
for multi-role, multi-turn dialogue summarization.

Task Definition.
Given a dialogue and its corresponding reference summary (generated by a stronger \
teacher model or human annotators), your goal is to reproduce a high-quality summary \
by explicitly reasoning over the dialogue content. The reference summary is provided \
only as supervision and should not be copied verbatim.

Reasoning Requirement.
Before producing the final summary, you must explicitly perform structured reasoning \
by outputting a <think></think> block that follows the four steps below:

1. Dialogue Examination:
Identify speakers, dialogue turns, and key utterances across the multi-role interaction.
2. Motivational Inference:
Infer speakers' intentions, preferences, or implicit goals behind their statements.
3. Core Content Abstraction:
Extract and abstract the essential information, including requests, responses, \
agreements, or conflicts.
4. Consistency and Fidelity Verification:
Verify that the abstracted content is faithful to the original dialogue and aligned \
with the reference summary, avoiding omissions, distortions, or hallucinated information.

Example Input:

Conversation:
Amanda: I baked cookies. Do you want some?
Jerry: Sure!
Amanda: I'll bring you tomorrow :-)

Summary:
Amanda baked cookies and will bring Jerry some tomorrow.

Example Output:

<think>I observed Amanda stating she baked cookies and offering some to Jerry, \
who accepted, followed by Amanda confirming she will bring them tomorrow; this \
sequence shows a clear offer, acceptance, and planned delivery, leading me to \
conclude Amanda baked cookies and will share them with Jerry the next day.</think>
Amanda baked cookies and will bring Jerry some tomorrow.

Conversation:
{dialogue}

Summary:
{summary}
"""

# System prompt for the principle-based judge. The verdict must be a single
# JSON object scoring labeled candidates and ranking them.
JUDGE_SYSTEM_PROMPT = """\
You are an evaluator judging model responses based on a given evaluation principle. \
Your primary goal is to assess how well each response adheres to the principle, \
prioritizing this over general preferences, while avoiding endorsement of harmful content.

Evaluation Procedure:
1. Carefully read the principle, the input prompt, and all candidate responses. \
Briefly consider how each response aligns with the principle in a concise reasoning process.
2. Assign a score to each response on a 1-5 scale:
   - 5: Perfect adherence with excellent overall quality
   - 4: Strong adherence with minor limitations
   - 3: Basic adherence
   - 2: Partial adherence with important omissions
   - 1: Poor adherence or contradiction to the principle
3. Rank all responses from best to worst. Responses with identical scores should \
still be ordered based on relative quality.

Use the full scoring range when necessary. Avoid score compression if there are \
clear quality differences among responses.

Output Format (JSON only):
{
  "scores": {"model-1": 2, "model-2": 4, ...},
  "best-to-worst": ["model-2", "model-1", ...]
}
"""

# Weighted rubric the judge scores candidate summaries against.
SUMMARY_PRINCIPLE = """\
Evaluate summaries using these criteria:

1. Key Information Coverage (40%)
- Does the summary capture the core facts of the dialogue?
- Must include: the request/proposal, the refusal, the insistence, and any implied \
motivation if present.
- Missing major elements is a critical error.

2. Inference and Implicit Understanding (30%)
- Does the summary correctly reflect implied attitudes, motives, or emotional tone \
(e.g., sarcasm, concern, frustration)?
- Reasonable inference is rewarded. Fabrication is penalized.

3. Faithfulness and Precision (20%)
- No hallucinations or incorrect claims beyond what can be safely inferred.
- The summary must not change the meaning of the original dialogue.

4. Conciseness and Clarity (10%)
- The summary should be brief, readable, and well-structured.
- Overly verbose summaries lose points even if factually correct.

Priority: Key information coverage > faithfulness > inference quality > clarity.
"""

JUDGE_USER_TEMPLATE = """\
Evaluation Principle:
{principle}

Input Prompt:
{dialogue}

Candidate Responses:
{candidates}
"""

# Sent once after an unparseable judge verdict; the reply must be JSON only.
JUDGE_REPAIR_PROMPT = (
    "Your previous reply could not be parsed as JSON. Reply again with ONLY the "
    'JSON object in the required format: {"scores": {"model-1": <1-5>, ...}, '
    '"best-to-worst": ["model-...", ...]}. No other text.'
)

CLAIM_DECOMPOSITION_PROMPT = """\
Decompose the following summary into atomic factual statements.

Rules:
- Each statement must be a single, self-contained fact that can be verified on its own.
- Resolve pronouns so every statement names its subject explicitly.
- Output one statement per line, in the order the facts appear in the summary.
- Output nothing except the statements themselves: no numbering, no bullets, no commentary.

Summary:
{summary}
"""


def render_distillation_prompt(dialogue_text: str, reference_summary: str) -> str:
    return DISTILLATION_PROMPT.format(dialogue=dialogue_text, summary=reference_summary)


def render_judge_user_prompt(dialogue_text: str, candidate_texts: list[str]) -> str:
    blocks = []
    for i, text in enumerate(candidate_texts, start=1):
        blocks.append(f"model-{i}:\n{text}")
    return JUDGE_USER_TEMPLATE.format(
        principle=SUMMARY_PRINCIPLE,
        dialogue=dialogue_text,
        candidates="\n\n".join(blocks),
    )


def render_decomposition_prompt(summary: str) -> str:
    return CLAIM_DECOMPOSITION_PROMPT.format(summary=summary)
