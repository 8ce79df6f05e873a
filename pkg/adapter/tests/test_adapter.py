import json
import threading
import urllib.request

import numpy as np
import pytest

from embed_adapter.export import (
    export_doc_embeddings,
    export_word_embeddings,
    read_corpus_texts,
    word_vector_for,
)
from embed_adapter.models import HashModel, ModelLoadError, WordVectorModel, load_model
from embed_adapter.server import make_server

CORPUS_HEADER = ("record_id,source_db,title,abstract,year,month,doi,"
                 "language,retracted,authors_json\n")


def write_corpus(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CORPUS_HEADER)
        for rid, title, abstract in rows:
            fh.write(f'{rid},other,{title},{abstract},2021,,,en,false,[]\n')


@pytest.fixture
def corpus(tmp_path):
    path = tmp_path / "corpus.csv"
    write_corpus(path, [(f"r{i}", f"title {i}", f"flood rescue text {i}") for i in range(10)])
    return path


def test_model_registry():
    assert isinstance(load_model("builtin:hash:64"), HashModel)
    assert load_model("builtin:hash").dim == 256
    with pytest.raises(ModelLoadError):
        load_model("magic:wand")
    with pytest.raises(ModelLoadError):
        load_model("")
    with pytest.raises(ModelLoadError):
        load_model("wordvec:/no/such/file.txt")


def test_hash_model_deterministic():
    m = HashModel(32)
    a = m.encode(["flood rescue", "flood rescue", ""])
    assert np.array_equal(a[0], a[1])
    assert np.allclose(a[2], np.eye(32)[0])
    assert np.allclose(np.linalg.norm(a[0]), 1.0)


def test_export_docs_count_and_order(tmp_path, corpus):
    out = tmp_path / "docs.tsv"
    n = export_doc_embeddings("builtin:hash:16", corpus, out, batch_size=3)
    assert n == 10
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "#dim=16\tkind=document"
    assert [ln.split("\t")[0] for ln in lines[1:]] == [f"r{i}" for i in range(10)]


def test_export_docs_identical_texts_identical_vectors(tmp_path):
    path = tmp_path / "c.csv"
    write_corpus(path, [("a", "same title", "same text"), ("b", "same title", "same text")])
    out = tmp_path / "docs.tsv"
    export_doc_embeddings("builtin:hash:16", path, out)
    rows = [ln.split("\t")[1:] for ln in out.read_text().splitlines()[1:]]
    assert rows[0] == rows[1]


def test_export_empty_corpus_header_only(tmp_path, caplog):
    path = tmp_path / "empty.csv"
    path.write_text(CORPUS_HEADER, encoding="utf-8")
    out = tmp_path / "docs.tsv"
    assert export_doc_embeddings("builtin:hash:8", path, out) == 0
    assert out.read_text() == "#dim=8\tkind=document\n"


def test_word_export_with_oov_sidecar(tmp_path):
    vectors = tmp_path / "wv.txt"
    vectors.write_text(
        "plastic 1.0 0.0\nwaste 0.0 1.0\nvirus 0.5 0.5\n", encoding="utf-8")
    vocab = tmp_path / "vocab.txt"
    vocab.write_text("virus\nplastic_waste\nunseen\n", encoding="utf-8")
    out = tmp_path / "words.tsv"
    sidecar = tmp_path / "oov.txt"
    n, oov = export_word_embeddings(f"wordvec:{vectors}", vocab, out, sidecar)
    assert (n, oov) == (2, 1)
    assert sidecar.read_text().splitlines() == ["unseen"]
    lines = out.read_text().splitlines()
    assert lines[0] == "#dim=2\tkind=word"
    by_id = {ln.split("\t")[0]: ln.split("\t")[1:] for ln in lines[1:]}
    # bigram = mean of part vectors
    assert [float(x) for x in by_id["plastic_waste"]] == [0.5, 0.5]


def test_word_vector_composition_rules(tmp_path):
    vectors = tmp_path / "wv.txt"
    vectors.write_text("alpha 2 0\nbeta 0 4\n", encoding="utf-8")
    model = WordVectorModel(str(vectors))
    assert np.allclose(word_vector_for(model, "alpha_beta"), [1.0, 2.0])
    assert word_vector_for(model, "alpha_gamma") is None
    assert word_vector_for(model, "gamma") is None


def test_corpus_reader_joins_title_abstract(tmp_path):
    path = tmp_path / "c.csv"
    write_corpus(path, [("a", "Title", "Abstract"), ("b", "", "Only abstract")])
    texts = dict(read_corpus_texts(path))
    assert texts["a"] == "Title Abstract"
    assert texts["b"] == "Only abstract"


@pytest.fixture
def server():
    srv = make_server("builtin:hash:16", port=0, max_batch=4)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{srv.server_address[1]}"
    srv.shutdown()


def _post(url, payload, raise_on_error=True):
    req = urllib.request.Request(
        url, data=json.dumps(payload).encode(), headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def test_healthz(server):
    with urllib.request.urlopen(server + "/healthz") as resp:
        assert resp.status == 200
        assert json.loads(resp.read())["dim"] == 16


def test_embed_two_inputs(server):
    status, body = _post(server + "/embed", {
        "inputs": [{"id": "a", "text": "flood"}, {"id": "b", "text": "fire"}]})
    assert status == 200
    assert body["dim"] == 16
    assert [v["id"] for v in body["vectors"]] == ["a", "b"]
    assert all(len(v["v"]) == 16 for v in body["vectors"])


def test_embed_malformed_json_is_400(server):
    req = urllib.request.Request(
        server + "/embed", data=b"{nope", headers={"Content-Type": "application/json"})
    try:
        urllib.request.urlopen(req)
        raise AssertionError("expected HTTP 400")
    except urllib.error.HTTPError as err:
        assert err.code == 400
    status, _ = _post(server + "/embed", {"wrong": []})
    assert status == 400


def test_embed_oversized_batch_is_413(server):
    status, body = _post(server + "/embed", {
        "inputs": [{"id": str(i), "text": "x"} for i in range(5)]})
    assert status == 413
    assert body["max_batch"] == 4
