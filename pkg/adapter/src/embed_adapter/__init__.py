"""embed-adapter: pre-trained embedding models behind the interchange file
format and the /embed HTTP contract."""

__version__ = "0.1.0"

from .export import export_doc_embeddings, export_word_embeddings  # noqa: F401
from .models import ModelLoadError, load_model  # noqa: F401
from .server import make_server, serve  # noqa: F401
