"""3x3 tic-tac-toe board rules. Boards are 9-tuples with X=1, O=-1, empty=0."""

from __future__ import annotations

X, O, EMPTY = 1, -1, 0

LINES = (
    (0, 1, 2), (3, 4, 5), (6, 7, 8),  # rows
    (0, 3, 6), (1, 4, 7), (2, 5, 8),  # columns
    (0, 4, 8), (2, 4, 6),  # diagonals
)
LINE_DIRECTIONS = ("h", "h", "h", "v", "v", "v", "d", "d")

EMPTY_BOARD = (EMPTY,) * 9


def to_move(board) -> int:
    n_x = sum(1 for c in board if c == X)
    n_o = sum(1 for c in board if c == O)
    return X if n_x == n_o else O


def winner(board) -> int:
    """Return X or O if that player has three in a row, else EMPTY."""
    for i, j, k in LINES:
        v = board[i]
        if v != EMPTY and v == board[j] == board[k]:
            return v
    return EMPTY


def is_full(board) -> bool:
    return all(c != EMPTY for c in board)


def is_over(board) -> bool:
    return winner(board) != EMPTY or is_full(board)


def empty_cells(board) -> tuple[int, ...]:
    return tuple(i for i, c in enumerate(board) if c == EMPTY)


def play(board, cell: int, mark: int) -> tuple[int, ...]:
    if board[cell] != EMPTY:
        raise ValueError(f"cell {cell} is occupied")
    b = list(board)
    b[cell] = mark
    return tuple(b)


def encode(board) -> int:
    """Base-3 integer code, used as a stable sort key."""
    code = 0
    for c in board:
        code = code * 3 + (c % 3)
    return code


def render(board) -> str:
    sym = {X: "X", O: "O", EMPTY: "."}
    rows = ["".join(sym[board[3 * r + c]] for c in range(3)) for r in range(3)]
    return "\n".join(rows)
