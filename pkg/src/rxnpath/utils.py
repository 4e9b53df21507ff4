"""Seeding and deterministic-mode helpers."""

from __future__ import annotations

import os
import random

import numpy as np
import torch


def deterministic_requested() -> bool:
    return os.environ.get("RXN_DETERMINISTIC", "0") == "1"


def seed_everything(seed: int, deterministic: bool = False) -> None:
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)
    if deterministic or deterministic_requested():
        # serial reductions give bitwise-repeatable sums
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True)


def torch_generator(seed: int) -> torch.Generator:
    g = torch.Generator()
    g.manual_seed(seed)
    return g
