"""Success probability of an alternate-history attack on a chain.

The attacker forks the chain privately and mines while the official chain
accumulates the ``N`` confirmations a victim waits for.  Every block race
goes to the official chain with probability ``1 / (1 + beta)`` and to the
attacker with probability ``beta / (1 + beta)``, where ``beta`` is the
attacker-to-official mining-rate ratio.  The number of blocks the attacker
pre-mines during the confirmation window is therefore negative binomial,
``NB(N, 1 / (1 + beta))``.  The subsequent race is a gambler's-ruin walk on
the attacker's deficit: overtaking (deficit below zero) wins, falling
``N_g`` blocks behind abandons.

Conditioning the walk on its first step gives the recursion

    P_n = P_{n+1} / (1 + beta) + beta * P_{n-1} / (1 + beta),  0 <= n < N_g

with boundaries ``P_{-1} = 1`` and ``P_{N_g} = 0``, whose solution is

    P_n = (beta^{n+1} - beta^{N_g+1}) / (1 - beta^{N_g+1})   (beta != 1)
    P_n = (N_g - n) / (N_g + 1)                              (beta == 1)

The overall success probability is the negative-binomial mixture of
``P_{N - n_Y}``.  Because every pre-mining count above ``N`` wins outright,
the infinite mixture collapses to ``N + 1`` terms plus the exact tail mass,
so the direct sum is evaluated without approximation.  A one-line closed
form exists when ``N_g > N``; outside that regime some mixture terms hit
the abandonment boundary and only the direct sum applies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ClosedFormRangeError(ValueError):
    """Closed form evaluated outside its ``giveup_threshold > confirmations`` domain."""


@dataclass(frozen=True)
class AttackParams:
    """Attack scenario: confirmation depth, relative mining power, give-up threshold."""

    confirmations: int
    relative_power: float
    giveup_threshold: int

    def __post_init__(self):
        if not isinstance(self.confirmations, int) or self.confirmations < 1:
            raise ValueError(f"confirmations must be an integer >= 1, got {self.confirmations!r}")
        if not (self.relative_power > 0 and math.isfinite(self.relative_power)):
            raise ValueError(f"relative_power must be finite and > 0, got {self.relative_power!r}")
        if not isinstance(self.giveup_threshold, int) or self.giveup_threshold < 1:
            raise ValueError(
                f"giveup_threshold must be an integer >= 1, got {self.giveup_threshold!r}"
            )


@dataclass(frozen=True)
class AttackResult:
    probability: float
    method: str
    std_error: float = 0.0
    trials: int | None = None


def negbin_pmf(attacker_blocks: int, confirmations: int, relative_power: float) -> float:
    """Probability the attacker pre-mines exactly ``attacker_blocks`` blocks
    while the official chain mines ``confirmations``.

    ``C(n+N-1, n) * (1/(1+beta))^N * (beta/(1+beta))^n`` evaluated in log
    space, so block counts in the hundreds neither overflow nor underflow.
    """
    if attacker_blocks < 0:
        return 0.0
    if relative_power == 0.0:
        return 1.0 if attacker_blocks == 0 else 0.0
    n, k = attacker_blocks, confirmations
    log_comb = math.lgamma(n + k) - math.lgamma(n + 1) - math.lgamma(k)
    log_p = -k * math.log1p(relative_power)
    log_q = n * (math.log(relative_power) - math.log1p(relative_power))
    return math.exp(log_comb + log_p + log_q)


def catch_up_probability(deficit: int, params: AttackParams) -> float:
    """Probability the attacker overtakes starting ``deficit`` blocks behind."""
    n_g = params.giveup_threshold
    if deficit < 0:
        return 1.0
    if deficit >= n_g:
        return 0.0
    beta = params.relative_power
    if beta == 1.0:
        return (n_g - deficit) / (n_g + 1)
    log_beta = math.log(beta)
    if log_beta < 0:
        # (beta^{n+1} - beta^{Ng+1}) / (1 - beta^{Ng+1}), expm1 keeps the
        # differences accurate as beta approaches one.
        num = math.exp((deficit + 1) * log_beta) * -math.expm1((n_g - deficit) * log_beta)
        den = -math.expm1((n_g + 1) * log_beta)
    else:
        # Same ratio scaled by beta^{-(Ng+1)} so exponents stay negative.
        num = -math.expm1((deficit - n_g) * log_beta)
        den = -math.expm1(-(n_g + 1) * log_beta)
    return num / den


def attack_success_direct(params: AttackParams) -> AttackResult:
    """Negative-binomial mixture of catch-up probabilities, summed exactly.

    Pre-mining counts above the confirmation depth win with certainty, so
    the infinite tail enters as its exact probability mass and no term is
    ever dropped; the nominal tail-truncation threshold of 1e-12 therefore
    never takes effect.
    """
    n_conf = params.confirmations
    pmf = [negbin_pmf(n, n_conf, params.relative_power) for n in range(n_conf + 1)]
    head = math.fsum(
        p * catch_up_probability(n_conf - n, params) for n, p in enumerate(pmf)
    )
    tail = max(0.0, 1.0 - math.fsum(pmf))
    probability = min(1.0, head + tail)
    return AttackResult(probability=probability, method="direct-sum")


def attack_success_closed(params: AttackParams) -> AttackResult:
    """One-line closed form, valid only for ``giveup_threshold > confirmations``.

    ``1 - sum_{n=0}^{N} C(n+N-1, n) (1/(1+b))^N (b/(1+b))^n
    (1 - b^{N-n+1}) / (1 - b^{Ng+1})`` for ``beta != 1``; at ``beta == 1``
    the ratio degenerates to ``(N - n + 1) / (N_g + 1)`` with the mixture
    weights reducing to powers of one half.
    """
    n_conf, beta, n_g = params.confirmations, params.relative_power, params.giveup_threshold
    if n_g <= n_conf:
        raise ClosedFormRangeError(
            "closed form needs giveup_threshold > confirmations "
            f"({n_g} <= {n_conf}); use attack_success_direct"
        )
    if beta == 1.0:
        acc = math.fsum(
            math.comb(n + n_conf - 1, n)
            * (n_conf - n + 1)
            / (n_g + 1)
            / 2.0 ** (n_conf + n)
            for n in range(n_conf + 1)
        )
    else:
        log_beta = math.log(beta)

        def defeat_ratio(n: int) -> float:
            # (1 - beta^{N-n+1}) / (1 - beta^{Ng+1}) on the stable side of one
            m = n_conf - n + 1
            if log_beta < 0:
                return math.expm1(m * log_beta) / math.expm1((n_g + 1) * log_beta)
            return (
                math.exp((m - n_g - 1) * log_beta)
                * math.expm1(-m * log_beta)
                / math.expm1(-(n_g + 1) * log_beta)
            )

        acc = math.fsum(
            negbin_pmf(n, n_conf, beta) * defeat_ratio(n) for n in range(n_conf + 1)
        )
    return AttackResult(probability=1.0 - acc, method="closed-form")


_DEFAULT_CHUNK = 1 << 18


def attack_success_montecarlo(
    params: AttackParams, trials: int, seed: int, chunk_size: int = _DEFAULT_CHUNK
) -> AttackResult:
    """Monte Carlo oracle: simulate the pre-mining draw and the deficit walk.

    Trials run in fixed-size partitions, each on an independent stream
    derived from ``(seed, partition_index)``, so the merged estimate is
    identical however the partitions are assigned to workers.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials!r}")
    n_conf, beta, n_g = params.confirmations, params.relative_power, params.giveup_threshold
    p_honest = 1.0 / (1.0 + beta)
    attacker_step = beta / (1.0 + beta)
    wins = 0
    for part, start in enumerate(range(0, trials, chunk_size)):
        size = min(chunk_size, trials - start)
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(part,)))
        )
        pre_mined = rng.negative_binomial(n_conf, p_honest, size=size)
        deficit = n_conf - pre_mined.astype(np.int64)
        wins += int(np.count_nonzero(deficit < 0))
        active = deficit[(deficit >= 0) & (deficit < n_g)]
        while active.size:
            steps = rng.random(active.size) < attacker_step
            active = active + np.where(steps, -1, 1)
            wins += int(np.count_nonzero(active < 0))
            active = active[(active >= 0) & (active < n_g)]
    p_hat = wins / trials
    std_error = math.sqrt(p_hat * (1.0 - p_hat) / trials)
    return AttackResult(
        probability=p_hat, method="monte-carlo", std_error=std_error, trials=trials
    )


def attack_success(params: AttackParams) -> AttackResult:
    """Analytic success probability: closed form when valid, direct sum otherwise."""
    if params.giveup_threshold > params.confirmations:
        return attack_success_closed(params)
    return attack_success_direct(params)
