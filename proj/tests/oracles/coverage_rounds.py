#!/usr/bin/env python3
"""Monte-Carlo check of the announce-round count needed for 90% coverage.

A tracker holding a swarm of N peers answers each announce with a uniform
200-peer sample (without replacement). The expected uncovered fraction
after r rounds is (1 - 200/N)^r; for N=5000 that crosses 0.1 at r ~ 57.
This script verifies the spread empirically so the acceptance bound
(<= 80 rounds) is safely above the real distribution.
"""
import random

N = 5000
NUMWANT = 200
TARGET = 0.9
SEEDS = 200

worst = 0
total = 0
for seed in range(SEEDS):
    rng = random.Random(seed)
    peers = list(range(N))
    seen = set()
    rounds = 0
    while len(seen) < TARGET * N:
        seen.update(rng.sample(peers, NUMWANT))
        rounds += 1
    worst = max(worst, rounds)
    total += rounds

import math
analytic = math.log(1 - TARGET) / math.log(1 - NUMWANT / N)
print(f"analytic ~ {analytic:.1f} rounds")
print(f"empirical mean {total / SEEDS:.1f}, worst over {SEEDS} seeds: {worst}")
