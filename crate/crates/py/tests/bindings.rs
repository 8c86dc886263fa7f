use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::PyDict;

const SCRIPT: &str = r##"
import json, os

m = vqa
assert m.normalize_label("IV") == "4"
assert m.normalize_label("III.16") == "16"

tree = m.parse_response("<chapter><title>1</title><qa_pair><label>Example 1</label>"
                        "<question>2,3</question><answer>4/5</answer><solution>5,6,7</solution></qa_pair></chapter>",
                        strict=True)
pair = tree["chapters"][0]["qa_pairs"][0]
assert pair["question_ids"] == [2, 3] and pair["answer_text"] == "4/5", tree
try:
    m.parse_response("<chapter><title>1</title> junk", strict=True)
    raise AssertionError("strict parse accepted junk")
except ValueError:
    pass

assert abs(m.f1(0.9968, 0.9766) - 0.9866) < 5e-5
assert abs(m.cost_per_question([(600000, 50000), (400000, 150000)], 1.25, 10.0, 100) - 0.0325) < 1e-9

docs = os.path.join(tmp, "book")
os.makedirs(docs)
records = [
    {"type": "text", "text": "Chapter 1 Sets", "text_level": 1, "page_idx": 0},
    {"type": "text", "text": "1. Show that A is a subset of A.", "page_idx": 0},
    {"type": "text", "text": "Every element of A lies in A.", "page_idx": 0},
]
path = os.path.join(docs, "content_list.json")
with open(path, "w") as f:
    json.dump(records, f)

doc = m.Document.load(path)
assert doc.doc_id == "book" and len(doc) == 3
assert doc.chunks(10, 2) == [[0, 1, 2]]

prompts = []
def respond(prompt):
    prompts.append(prompt)
    return ("<chapter><title>0</title><qa_pair><label>1.</label><question>1</question>"
            "<answer></answer><solution>2</solution></qa_pair></chapter>")

ex = m.extract([path], respond=respond, window=10, overlap=2)
assert len(prompts) == 1 and ex.failed_chunks == 0
(p,) = ex.pairs
assert (p.chapter, p.label, p.partial) == ("Chapter 1 Sets", "1", False), p.to_dict()
assert "subset" in p.question_text and "Every element" in p.solution_text
assert "Every element" in p.markdown()

out = os.path.join(tmp, "pairs.jsonl")
assert m.save_pairs(ex.pairs, out) == 1
assert m.load_pairs(out)[0].to_dict() == p.to_dict()

gold = os.path.join(tmp, "gold.json")
with open(gold, "w") as f:
    json.dump({"doc_ids": ["book"], "gold_pairs": [
        {"chapter": "Chapter 1 Sets", "label": "1", "question_block_ids": [1], "solution_block_ids": [2]}]}, f)
r = m.score(ex.pairs, gold)
assert r.text["f1"] == 1.0 and r.text["tp"] == 1, r.to_dict()
assert "1.0000" in r.table()

def broken(prompt):
    raise RuntimeError("model down")
ex = m.extract([path], respond=broken, window=10, overlap=2)
assert ex.failed_chunks == 1 and ex.pairs == []
assert ex.diagnostics[0]["kind"] == "gateway_failure"
"##;

#[test]
fn module_round_trip_through_python() {
    let tmp = tempfile::tempdir().unwrap();
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(vqa_miner_py::vqa_miner_py)(py);
        let globals = PyDict::new(py);
        globals.set_item("vqa", module).unwrap();
        globals.set_item("tmp", tmp.path().to_str().unwrap()).unwrap();
        let code = CString::new(SCRIPT).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("python script failed: {e}");
        }
    });
}
