"""litkit: bibliographic corpora to screened datasets, topics, metrics,
collaboration networks, and generated topic descriptions."""

__version__ = "0.1.0"

from .records import AuthorRef, BiblioRecord, PrismaReport  # noqa: F401
from .embeddings import EmbeddingMatrix, cosine  # noqa: F401
from .topicmodel import Topic, TopicAssignment, TopicModelConfig, fit  # noqa: F401
