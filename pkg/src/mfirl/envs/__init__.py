from mfirl.envs.base import Environment
from mfirl.envs.blackjack import BlackjackEnv
from mfirl.envs.gridworld import GridworldEnv
from mfirl.envs.tictactoe import TicTacToeEnv

ENV_TAGS = ("blackjack", "gridworld32", "tictactoe:random", "tictactoe:minimax")


def make_env(tag: str, **overrides) -> Environment:
    """Build an environment from its tag, e.g. ``"tictactoe:minimax"``.

    ``overrides`` go to the constructor (gamma, gridworld region sizes, ...).
    """
    if tag == "blackjack":
        return BlackjackEnv(**overrides)
    if tag.startswith("gridworld"):
        size = tag[len("gridworld"):]
        if size:
            overrides.setdefault("size", int(size))
        return GridworldEnv(**overrides)
    if tag.startswith("tictactoe:"):
        return TicTacToeEnv(opponent=tag.split(":", 1)[1], **overrides)
    raise ValueError(f"unknown environment {tag!r}")


__all__ = ["ENV_TAGS", "BlackjackEnv", "Environment", "GridworldEnv", "TicTacToeEnv", "make_env"]
