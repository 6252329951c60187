import random

import pytest

from tpossp.generate import GeneratorConfig, generate, micro3
from tpossp.model import add_dummy_schedules

ACCEPTANCE_LINES: list[str] = []


def small_instance(seed: int, dummies: bool = False):
    """Random instance with at most 8 hubs, 30 legs and 3 requests."""
    rng = random.Random(seed)
    hubs = rng.randint(3, 8)
    lps = rng.randint(1, 4)
    cfg = GeneratorConfig(hubs=hubs, schedules=rng.randint(1, 30 // lps), legs_per_schedule=lps,
                          requests=rng.randint(1, 3), base_slack=rng.choice((0, 60, 240)),
                          window_slack=rng.choice((0, 0, 30, 120)), seed=seed)
    inst = generate(cfg)
    return add_dummy_schedules(inst) if dummies else inst


def desk_instance(seed: int):
    """Oracle-solvable instance: 8 requests over 36 legs, dummies attached."""
    return add_dummy_schedules(generate(GeneratorConfig(hubs=8, schedules=12, legs_per_schedule=3,
                                                        requests=8, seed=seed)))


def random_duals(instance, seed: int):
    from tpossp.pricing import DualPrices

    rng = random.Random(seed)
    pc = {l.id: -rng.randint(0, 5000) for l in instance.legs if rng.random() < 0.4}
    ps = {(l.id, r.id): -rng.randint(0, 50000) for l in instance.legs for r in instance.requests
          if rng.random() < 0.3}
    pr = {r.id: rng.randint(0, 400000) for r in instance.requests}
    return DualPrices(pc, ps, pr)


@pytest.fixture
def m3():
    return micro3()


@pytest.fixture
def m3d():
    return add_dummy_schedules(micro3())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
