import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def trained():
    """A linear model trained on a small synthetic treebank, with its lexicon."""
    from morphcda.pipeline import build_lexicon
    from morphcda.synthetic import SyntheticLanguage
    from morphcda.training import TrainConfig, train

    lang = SyntheticLanguage(seed=21)
    train_set = lang.corpus(800)
    dev_set = lang.corpus(50)
    params, tagset, history = train(train_set, dev_set, TrainConfig(max_epochs=20))
    return {"params": params, "tagset": tagset, "history": history, "train": train_set,
            "lexicon": build_lexicon(train_set)}


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
