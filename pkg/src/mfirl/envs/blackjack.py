"""Infinite-deck blackjack: 200 decision states plus one terminal.

Dealer sticks on every 17 (soft ones included). A two-card 21 is a natural
paid at +1.5 before any decision, so it never enters the decision process;
the start distribution is conditioned on a non-natural deal.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from mfirl.core import TabularMDP
from mfirl.envs.base import Environment

HIT, STICK = 0, 1
PLAYER_SUMS = range(12, 22)
DEALER_CARDS = range(1, 11)
N_DECISION_STATES = 200
TERMINAL = 200
NATURAL_REWARD = 1.5

# card value -> probability (ranks uniform, J/Q/K count as 10)
CARD_PROBS = {v: (4 / 13 if v == 10 else 1 / 13) for v in range(1, 11)}


def state_index(player_sum: int, dealer_card: int, usable_ace: int) -> int:
    return ((player_sum - 12) * 10 + (dealer_card - 1)) * 2 + int(usable_ace)


def decode_state(s: int) -> tuple[int, int, int]:
    if s == TERMINAL:
        raise ValueError("terminal state has no decoding")
    usable = s % 2
    rest = s // 2
    return rest // 10 + 12, rest % 10 + 1, usable


def add_card(total: int, usable: bool, card: int) -> tuple[int, bool]:
    """Add a card value to a hand; an ace counts 11 when that does not bust."""
    if card == 1 and total + 11 <= 21:
        return total + 11, True
    total += card
    if total > 21 and usable:
        return total - 10, False
    return total, usable


def draw_card(rng: np.random.Generator) -> int:
    return min(int(rng.integers(1, 14)), 10)


@lru_cache(maxsize=None)
def dealer_final_distribution(total: int, usable: bool) -> dict[int, float]:
    """Distribution of the dealer's final total from a hand (22 means bust)."""
    if total > 21:
        return {22: 1.0}
    if total >= 17:
        return {total: 1.0}
    out: dict[int, float] = {}
    for card, p in CARD_PROBS.items():
        for final, q in dealer_final_distribution(*add_card(total, usable, card)).items():
            out[final] = out.get(final, 0.0) + p * q
    return out


def dealer_outcome_distribution(upcard: int) -> dict[int, float]:
    return dealer_final_distribution(*add_card(0, False, upcard))


def stick_reward(player_sum: int, dealer_card: int) -> float:
    """Expected payoff of sticking on ``player_sum``."""
    value = 0.0
    for final, p in dealer_outcome_distribution(dealer_card).items():
        if final > 21 or player_sum > final:
            value += p
        elif player_sum < final:
            value -= p
    return value


def _settle(player_sum: int, dealer_card: int, rng: np.random.Generator) -> float:
    total, usable = add_card(0, False, dealer_card)
    while total < 17:
        total, usable = add_card(total, usable, draw_card(rng))
    if total > 21 or player_sum > total:
        return 1.0
    return -1.0 if player_sum < total else 0.0


class BlackjackEnv(Environment):
    tag = "blackjack"
    n_states = 201
    n_actions = 2
    episodic = True
    action_names = ("hit", "stick")

    def __init__(self, gamma: float = 1.0):
        self.gamma = gamma

    def deal(self, rng: np.random.Generator) -> tuple[int, int, bool, bool]:
        """Deal one hand: returns (player_sum, dealer_card, usable, natural).

        Auto-hits while the player sum is below 12; the natural flag refers
        to the initial two cards only.
        """
        total, usable = add_card(0, False, draw_card(rng))
        total, usable = add_card(total, usable, draw_card(rng))
        natural = total == 21
        dealer = draw_card(rng)
        while total < 12:
            total, usable = add_card(total, usable, draw_card(rng))
        return total, dealer, usable, natural

    def reset(self, rng: np.random.Generator) -> int:
        while True:
            total, dealer, usable, natural = self.deal(rng)
            if not natural:
                return state_index(total, dealer, usable)

    def play_episode_return(self, rng: np.random.Generator, policy) -> float:
        """Sample a full hand including naturals; ``policy(s, rng) -> action``."""
        total, dealer, usable, natural = self.deal(rng)
        if natural:
            return NATURAL_REWARD
        s = state_index(total, dealer, usable)
        while True:
            a = policy(s, rng)
            if a == STICK:
                p, d, _ = decode_state(s)
                return _settle(p, d, rng)
            s, done = self._step(s, a, rng)
            if done:
                return -1.0

    def _step(self, s, a, rng):
        if a == STICK:
            return TERMINAL, True
        p, d, u = decode_state(s)
        total, usable = add_card(p, bool(u), draw_card(rng))
        if total > 21:
            return TERMINAL, True
        return state_index(total, d, usable), False

    def legal_mask(self) -> np.ndarray:
        mask = np.ones((self.n_states, self.n_actions), dtype=bool)
        mask[TERMINAL] = False
        return mask

    def start_distribution(self) -> np.ndarray:
        """Exact first-decision-state distribution given no natural."""
        hands: dict[tuple[int, bool], float] = {}

        def grow(total, usable, p):
            if total >= 12:
                hands[(total, usable)] = hands.get((total, usable), 0.0) + p
                return
            for card, q in CARD_PROBS.items():
                grow(*add_card(total, usable, card), p * q)

        for c1, p1 in CARD_PROBS.items():
            for c2, p2 in CARD_PROBS.items():
                total, usable = add_card(*add_card(0, False, c1), c2)
                if total == 21:
                    continue
                grow(total, usable, p1 * p2)
        mu = np.zeros(self.n_states)
        for (total, usable), p in hands.items():
            for d, q in CARD_PROBS.items():
                mu[state_index(total, d, usable)] += p * q
        return mu / mu.sum()

    def _build_model(self) -> TabularMDP:
        S, A = self.n_states, self.n_actions
        rows, cols, vals = [], [], []
        reward = np.zeros((S, A))
        for s in range(N_DECISION_STATES):
            p, d, u = decode_state(s)
            # hit
            next_probs: dict[int, float] = {}
            for card, q in CARD_PROBS.items():
                total, usable = add_card(p, bool(u), card)
                nxt = TERMINAL if total > 21 else state_index(total, d, usable)
                if total > 21:
                    reward[s, HIT] -= q
                next_probs[nxt] = next_probs.get(nxt, 0.0) + q
            for nxt, q in next_probs.items():
                rows.append(s * A + HIT)
                cols.append(nxt)
                vals.append(q)
            rows.append(s * A + STICK)
            cols.append(TERMINAL)
            vals.append(1.0)
            reward[s, STICK] = stick_reward(p, d)
        for a in range(A):
            rows.append(TERMINAL * A + a)
            cols.append(TERMINAL)
            vals.append(1.0)
        P = sp.csr_matrix((vals, (rows, cols)), shape=(S * A, S))
        return TabularMDP(S, A, P, reward, self.start_distribution(), self.terminal.copy(),
                          self.legal.copy(), self.gamma)

    def natural_probability(self) -> float:
        return 2 * CARD_PROBS[1] * CARD_PROBS[10]
