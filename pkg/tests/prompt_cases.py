"""Fixed inputs used to render each prompt template for the golden-file tests."""

from nfqa.core import Passage, QaPair
from nfqa.prompts import (
    format_candidate_answers,
    format_debate_responses,
    format_passages,
    format_qa_pairs,
    format_reference_answers,
)

PASSAGES = [
    Passage(id="p1", title="Sterilization (economics)", text="Sterilization is a monetary action to offset capital flows."),
    Passage(id="p2", title="Central bank", text="Central banks manage currency and the money supply."),
]

QA_PAIRS = [
    QaPair(question="What was the purpose of the Curzon Line?", answer="A proposed demarcation line."),
    QaPair(question="Why was the Curzon Line drawn?", answer="To settle a border dispute."),
]

REFERENCES = [
    "Earth's gravity pulls everything toward its center, including water.",
    "The answer is because gravity is holding us (and the water) down.",
    "Same reason the people don't.",
    "Rain is considered naturally acidic because of dissolved CO2.",
]

CANDIDATES = [
    "Gravity keeps the water anchored to the surface.",
    "Because the earth is flat.",
    "Water evaporates into space.",
]

RENDER_CASES = {
    "llm_answer": {"question": "How does sterilisation help to keep the money flow even?"},
    "rag_answer": {
        "question": "How does sterilisation help to keep the money flow even?",
        "reference_passages": format_passages(PASSAGES),
    },
    "compare_analyze": {"query": "what is the difference between dysphagia and odynophagia"},
    "compare_answer": {
        "question": "what is the difference between dysphagia and odynophagia",
        "comparison_type": "differences",
        "keywords": "dysphagia, odynophagia",
        "reference_passages": format_passages(PASSAGES),
    },
    "experience_keywords": {"question": "What are some of the best Portuguese wines?"},
    "reason_subqueries": {
        "query": "Kresy, which roughly was a part of the land beyond the so-called "
        "Curson Line, was drawn for what reason?"
    },
    "instruction_subqueries": {"query": "How can you find a lodge to ask to be a member of?"},
    "aggregate_answers": {
        "original_question": "Kresy, which roughly was a part of the land beyond the "
        "so-called Curson Line, was drawn for what reason?",
        "qa_pairs_text": format_qa_pairs(QA_PAIRS),
    },
    "debate_decompose": {"query": "Is Trump a good president?"},
    "debate_mediator": {
        "debate_topic": "Donald Trump's presidency",
        "responses": format_debate_responses(
            [
                ("The economy grew strongly.", "positive"),
                ("Institutions were weakened.", "negative"),
                ("Outcomes were mixed across areas.", "neutral"),
            ]
        ),
    },
    "linkage_rank": {
        "question": "Why doesn't the water fall off earth if it's round?",
        "reference_answers": format_reference_answers(REFERENCES),
        "candidate_answer": "Gravity keeps the water anchored to the surface.",
    },
    "reference_rewrite": {
        "question": "Why doesn't the water fall off earth if it's round?",
        "ground_truth": "Gravity pulls water toward Earth's center.",
    },
    "reference_tiers": {
        "question": "Why doesn't the water fall off earth if it's round?",
        "ground_truth": "Gravity pulls water toward Earth's center.",
    },
    "annotate_system": {},
    "annotate_input": {
        "question": "Why doesn't the water fall off earth if it's round?",
        "reference_answers": format_candidate_answers(CANDIDATES),
    },
}

# Sentences lifted verbatim from the published figures; each rendered prompt
# must contain its anchors byte-for-byte.
VERBATIM_ANCHORS = {
    "llm_answer": [
        "You are an assistant for answering questions.",
        "Answer the following question.",
    ],
    "rag_answer": ["Refer to the references below and answer the following question."],
    "compare_analyze": [
        '1. Identify the type of comparison: "differences", "similarities", or "superiority".',
        '{"is_compare": true/false, "compare_type": "", "keywords_list": []}',
        '"keywords_list": ["human intelligence", "the intelligence of other beings"]',
    ],
    "compare_answer": [
        "The question is a compare-type with a specific comparison type and keywords "
        "indicating the items to compare.",
        "Comparison Type: differences",
    ],
    "experience_keywords": [
        "2. Extract the key entities in the question, considering the intent of asking "
        "about experience, to facilitate an accurate response.",
        'Answer (Output): ["Portuguese wines", "best"]',
    ],
    "reason_subqueries": [
        "The input query is a reason-type question",
        "2. Create at least 2 to 5 distinct multiple sub-queries.",
    ],
    "instruction_subqueries": [
        "The input query is an instruction-type question",
        "2. Create at least 2 to 5 distinct multiple sub-queries.",
    ],
    "aggregate_answers": [
        "synthesize a concise and accurate response to the original question",
        "You are provided with the original question and multiple question-answer pairs.",
    ],
    "debate_decompose": [
        "1. Extract the debate topic.",
        "2. Identify 2 to 5 key perspectives on this topic.",
        "3. Generate a sub-query reflecting each perspective's bias.",
        '"dist_opinion": ["positive", "negative", "neutral"]',
    ],
    "debate_mediator": [
        "You are acting as the mediator in a debate.",
        'without using phrases like "participants in the debate" or "in the debate."',
    ],
    "linkage_rank": [
        "ranked in descending order of quality",
        'Your response must strictly following this format: "[[2]]" if candidate answer '
        "could rank 2nd.",
        "if it outperforms all references, output [[1]]",
    ],
    "reference_rewrite": ["Use your internal knowledge to rewrite this answer."],
    "reference_tiers": [
        "Generate three different answers to a non-factoid question from good to bad in quality",
        "Answer 3 is completely out of context or does not make any sense.",
        "Answer 2: Just like and enjoy the work you do, concentration will come automatically.",
    ],
    "annotate_system": [
        "`Answer X: [[Y]]`",
        "- 3: The answer provides a comprehensive, accurate, and contextually relevant "
        "response that directly addresses the question.",
    ],
    "annotate_input": ["- Non-Factoid Question:", "- Candidate Answers:"],
}
