"""End to end through the command line: corpus, index, queries, precision.

Equivalent shell session::

    regionsearch gen-synthetic --seed 0 --out corpus
    regionsearch build-index corpus/images --out corpus/db.idx
    regionsearch query --index corpus/db.idx --query corpus/queries --k 5 --out results.jsonl
    regionsearch eval-precision results.jsonl corpus/ground_truth.json --k 5
"""

import sys
import tempfile
from pathlib import Path

from regionsearch.cli import main

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    steps = [
        ["gen-synthetic", "--seed", "0", "--out", str(root / "corpus")],
        ["build-index", str(root / "corpus" / "images"), "--out", str(root / "db.idx")],
        ["query", "--index", str(root / "db.idx"), "--query", str(root / "corpus" / "queries"),
         "--k", "5", "--out", str(root / "results.jsonl")],
        ["eval-precision", str(root / "results.jsonl"),
         str(root / "corpus" / "ground_truth.json"), "--k", "5"],
    ]
    for argv in steps:
        print("$ regionsearch", " ".join(argv[:1]))
        code = main(argv)
        if code:
            sys.exit(code)
