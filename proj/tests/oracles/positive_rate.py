"""Monte-Carlo estimate of the timing-classification positive rate.

Channel-0 arrivals are a Poisson process of rate LAMBDA on [0, WINDOW); the
label is 1 when the largest gap, counting the leading gap from 0 and the
trailing gap to WINDOW, exceeds THRESHOLD. Independent of the C++ generator.
"""
import numpy as np

LAMBDA = 0.5
WINDOW = 48.0
THRESHOLD = 6.0
N = 100_000


def max_gap(rng):
    n = rng.poisson(LAMBDA * WINDOW)
    times = np.sort(rng.uniform(0.0, WINDOW, size=n))
    edges = np.concatenate(([0.0], times, [WINDOW]))
    return np.diff(edges).max()


def main():
    rng = np.random.default_rng(20240101)
    labels = np.array([max_gap(rng) > THRESHOLD for _ in range(N)])
    p = labels.mean()
    se = np.sqrt(p * (1 - p) / N)
    print(f"positive_rate={p:.5f} se={se:.5f}")


if __name__ == "__main__":
    main()
