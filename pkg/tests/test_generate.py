import pytest

from tpossp.generate import GeneratorConfig, generate, micro3
from tpossp.model import validate_instance, write_instance


def test_deterministic():
    cfg = GeneratorConfig(hubs=10, schedules=8, requests=5, seed=42)
    assert write_instance(generate(cfg)) == write_instance(generate(cfg))
    assert write_instance(generate(cfg)) != write_instance(generate(GeneratorConfig(hubs=10, schedules=8,
                                                                                    requests=5, seed=43)))


@pytest.mark.parametrize("seed", range(30))
def test_valid(seed):
    assert validate_instance(generate(GeneratorConfig(hubs=12, schedules=10, requests=6, seed=seed))) == []


def test_no_requests():
    inst = generate(GeneratorConfig(requests=0))
    assert inst.requests == () and validate_instance(inst) == []


def test_bad_config():
    with pytest.raises(ValueError):
        generate(GeneratorConfig(hubs=1))
    with pytest.raises(ValueError):
        generate(GeneratorConfig(requests=-1))


def test_micro3_valid():
    assert validate_instance(micro3()) == []
