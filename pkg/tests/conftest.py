"""Shared fixtures: small corpora and models sized for fast tests."""

from pathlib import Path

import pytest

from ragtune.corpus import Corpus, QAPair, load_corpus
from ragtune.embedder import init_model
from ragtune.synthdata import load_demo_corpus

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def tiny_corpus() -> Corpus:
    """Six English QA pairs with pairwise distinct answers."""
    rows = [
        ("d1", "How do I check the filing status of my application?",
         "Use the online register and enter the application number to view status."),
        ("d2", "What is the renewal fee for the third year?",
         "The third year renewal fee is 2500 and is due before the anniversary date."),
        ("d3", "Where can I request a certified copy of the priority document?",
         "Certified copies are issued by the receiving office on written request."),
        ("d4", "Can I amend the claims after allowance?",
         "Amendments after allowance require a petition and are limited to formal matters."),
        ("d5", "Who may sign the power of attorney form?",
         "The applicant or an officer of the applicant company may sign the form."),
        ("d6", "Is machine translation accepted for the search report?",
         "Machine translation is accepted provisionally but a human version may be ordered."),
    ]
    return Corpus(
        name="tiny",
        pairs=tuple(QAPair(id=i, question=q, answer=a) for i, q, a in rows),
    )


@pytest.fixture
def patent_corpus() -> Corpus:
    """Two Chinese patent QA pairs; near-domain hard negatives of each other."""
    return load_corpus(FIXTURES / "patent_qa_zh.jsonl")


@pytest.fixture
def small_model():
    """Model at test scale: feat_dim 2^10, emb_dim 16, hash_seed 17, seed 0."""
    return init_model(feat_dim=2**10, emb_dim=16, hash_seed=17, seed=0)


@pytest.fixture(scope="session")
def demo_corpus() -> Corpus:
    return load_demo_corpus()
