import pytest
import torch

from cirlab.compose.encoders import EncoderDims, ToyEncoderBackend
from cirlab.core.tokenizer import DEFAULT_TOKENIZER
from cirlab.core.types import DatasetManifest, ImageRef, ModText, Triplet
from cirlab.sgparse.rule_parser import RuleParserBackend


@pytest.fixture(autouse=True)
def _default_dtype():
    previous = torch.get_default_dtype()
    torch.set_default_dtype(torch.float64)
    yield
    torch.set_default_dtype(previous)


@pytest.fixture
def parser():
    return RuleParserBackend()


@pytest.fixture
def toy_backend():
    return ToyEncoderBackend(
        dims=EncoderDims(channels=4, image_dim=32, seq_len=16, text_dim=32, vector_dim=32),
        seed=0,
    )


def make_triplet(
    tid="t0",
    ref_id="a",
    target_id="b",
    text="add a hat",
    split="train",
    status="raw",
    grain="fine",
    **kwargs,
):
    return Triplet(
        id=tid,
        ref=ImageRef(id=ref_id, uri=f"vec://1.0,0.0", split=split),
        target=ImageRef(id=target_id, uri=f"vec://0.0,1.0", split=split),
        mod_text=ModText.from_text(text, DEFAULT_TOKENIZER, grain=grain),
        status=status,
        **kwargs,
    )


@pytest.fixture
def tiny_manifest():
    return DatasetManifest(
        name="tiny",
        triplets=(
            make_triplet("t0", "a", "b", "add a hat"),
            make_triplet("t1", "c", "d", "the dog is wearing a red collar", split="test"),
        ),
    )
