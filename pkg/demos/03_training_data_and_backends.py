"""Training instances from a corpus, and a model served over a pipe.

Imagination instances are re-sampled every epoch: each epoch drops out a
different subset of concepts and shuffles the rest.  The second half talks
to the bundled mock backend through the same client used for real models.

    python demos/03_training_data_and_backends.py
"""

import sys
from pathlib import Path

from skgkit import ImaginationRequest, encode
from skgkit.backend import BackendClient, BackendError
from skgkit.corpus import read_corpus
from skgkit.instances import build_imagination_epoch, build_verbalization_instances

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

records = read_corpus(FIXTURES / "corpus50.jsonl")[:2]
for epoch in range(3):
    first = build_imagination_epoch(records, global_seed=13, dropout_rate=0.3, epoch=epoch)[0]
    print(f"epoch {epoch}: {first.input}")
print(f"target:  {first.target}\n")

for inst in build_verbalization_instances(records[0]):
    print(f"[{inst.skg_origin}] {inst.input}\n      -> {inst.target}")

# The mock backend answers imagine requests with a fixed graph and
# verbalizes with the template realizer.
command = f"{sys.executable} -m skgkit.mock_backend --penman '(z0 / fly :ARG0 (z1 / kite))'"
with BackendClient(f"stdio:{command}", timeout=10) as client:
    result = client.imagine(ImaginationRequest(context=(), concepts=("kite",)))
    print("\nimagined:", encode(result.graph))

with BackendClient(f"stdio:{command.split(' --')[0]} --error 'model not loaded'", retries=0) as client:
    try:
        client.imagine(ImaginationRequest(context=(), concepts=("kite",)))
    except BackendError as exc:
        print("backend error:", exc)
